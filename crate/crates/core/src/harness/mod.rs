//! Experiment driver: configuration files, seeded multi-path runs, sweeps,
//! envelope verification and CSV/JSON reports.

mod config;
mod experiment;
mod report;
mod verify;

pub use config::{
    BipartiteKind, BoundsConfig, ExperimentConfig, GameConfig, OutputConfig, OutputFormat, RunConfig, ScheduleKind,
    SweepConfig, TopologyConfig,
};
pub use experiment::{
    build_setup, build_topology, dump_topology, recording_grid, run_experiment, sweep, tracked_agents, RunOptions,
    SweepAxis, SweepCell,
};
pub use report::{sweep_csv, write_atomic, write_report, write_sweep, RunReport, SeriesSummary, CSV_HEADER};
pub use verify::{verify_bounds, EnvelopeCheck, VerificationReport};
