use std::path::Path;

use dsmd::engine::InitRule;
use dsmd::games::Regularization;
use dsmd::geometry::SimplexPoint;
use dsmd::harness::{
    build_setup, run_experiment, sweep, write_report, ExperimentConfig, RunOptions, SweepAxis, CSV_HEADER,
};
use dsmd::metrics::gap;
use dsmd::topology::GraphKind;
use dsmd::Error;

fn fixture(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    ExperimentConfig::from_path(&path).unwrap()
}

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.game.actions = 4;
    cfg.game.n1 = 4;
    cfg.game.n2 = 3;
    cfg.run.horizon = 30;
    cfg.run.paths = 6;
    cfg.output.thin = 5;
    cfg
}

#[test]
fn csv_matches_golden_file() {
    let report = run_experiment(&fixture("tiny.toml"), &RunOptions::default()).unwrap();
    let csv = report.to_csv();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.csv");
    if std::env::var_os("DSMD_BLESS").is_some() {
        std::fs::write(&golden, &csv).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).unwrap();
    assert_eq!(csv, expected);
}

#[test]
fn csv_schema() {
    let report = run_experiment(&fixture("tiny.toml"), &RunOptions::default()).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6, "{line}");
        assert!(cols[0].parse::<usize>().is_ok());
        assert!(cols[2].parse::<f64>().unwrap().is_finite());
        assert!(cols[3].parse::<f64>().unwrap() >= 0.0);
        assert_eq!(cols[5], report.config_hash);
    }
    for s in &report.series {
        assert_eq!(s.mean.len(), report.grid.len());
        assert_eq!(s.stderr.len(), report.grid.len());
    }
}

#[test]
fn degenerate_run_reports_single_gap() {
    let mut cfg = ExperimentConfig::default();
    cfg.game.n1 = 1;
    cfg.game.n2 = 1;
    cfg.game.actions = 3;
    cfg.topology.network1 = GraphKind::Complete;
    cfg.run.horizon = 1;
    cfg.run.paths = 1;
    let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(report.grid, vec![1]);
    let g = report.series("gap", "all").unwrap();
    assert_eq!(g.mean.len(), 1);
    // x̂(1) = x(0) = uniform for both networks.
    let setup = build_setup(&cfg).unwrap();
    let u = SimplexPoint::uniform(3).into_inner();
    assert_eq!(g.mean[0], gap(&setup.game, &u, &u).unwrap());
    assert_eq!(g.stderr[0], 0.0);
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let mut cfg = small();
    cfg.run.init = InitRule::RandomInterior;
    let one = run_experiment(&cfg, &RunOptions { workers: Some(1) }).unwrap();
    let four = run_experiment(&cfg, &RunOptions { workers: Some(4) }).unwrap();
    let again = run_experiment(&cfg, &RunOptions { workers: Some(1) }).unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(one.to_csv(), again.to_csv());
    assert_eq!(one.path_seeds, (1000..1006).collect::<Vec<u64>>());
    cfg.run.seed += 1;
    let shifted = run_experiment(&cfg, &RunOptions { workers: Some(1) }).unwrap();
    assert_ne!(one.to_csv(), shifted.to_csv());
}

#[test]
fn regularized_run_records_error_metrics() {
    let mut cfg = small();
    cfg.game.regularization = Regularization::Entropic;
    cfg.run.schedule = dsmd::harness::ScheduleKind::StronglyConvex;
    let report = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(report.ne.is_some() && !report.ne_failed);
    for (metric, id) in [("abs_error", "all"), ("mse", "all"), ("mse_bound", "all"), ("regret_bound", "sc")] {
        assert!(report.series(metric, id).is_some(), "{metric}");
    }
    let plain = run_experiment(&small(), &RunOptions::default()).unwrap();
    assert!(plain.series("abs_error", "all").is_none());
    assert!(plain.series("regret_bound", "sc").is_none());
}

#[test]
fn reports_are_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&fixture("tiny.toml"), &RunOptions::default()).unwrap();
    write_report(&report, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv, report.to_csv());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], report.config_hash);
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn schedule_sweep_gives_one_report_per_exponent() {
    let cells = sweep(&small(), SweepAxis::Schedule, &RunOptions::default()).unwrap();
    assert_eq!(cells.len(), 3);
    let labels: Vec<_> = cells.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels[0], "exponent=0.5");
    let reports: Vec<_> = cells.iter().map(|c| c.result.as_ref().unwrap()).collect();
    assert!(reports.iter().all(|r| r.path_seeds == reports[0].path_seeds));
    assert_ne!(reports[0].config_hash, reports[1].config_hash);
}

#[test]
fn topology_sweep_survives_a_failing_cell() {
    let cells = sweep(&small(), SweepAxis::Topology, &RunOptions::default()).unwrap();
    assert_eq!(cells.len(), 3);
    assert!(cells.iter().all(|c| c.result.is_ok()));

    let mut cfg = small();
    cfg.game.n1 = 1;
    cfg.topology.network1 = GraphKind::Complete;
    let cells = sweep(&cfg, SweepAxis::Topology, &RunOptions::default()).unwrap();
    assert!(matches!(cells[0].result, Err(Error::Config(_))), "a one-node cycle must fail");
    assert!(cells[1].result.is_ok() && cells[2].result.is_ok());
}

#[test]
fn empty_sweep_axis_is_rejected() {
    let mut cfg = small();
    cfg.sweep.exponents.clear();
    assert!(matches!(sweep(&cfg, SweepAxis::Schedule, &RunOptions::default()), Err(Error::Config(_))));
    cfg.sweep.topologies.clear();
    assert!(matches!(sweep(&cfg, SweepAxis::Topology, &RunOptions::default()), Err(Error::Config(_))));
}
