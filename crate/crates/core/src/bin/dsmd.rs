//! Command-line front end: `run`, `sweep`, `verify-bounds`, `dump-topology`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsmd::harness::{
    dump_topology, run_experiment, sweep, verify_bounds, write_atomic, write_report, write_sweep, ExperimentConfig,
    RunOptions, SweepAxis,
};
use dsmd::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;

#[derive(Parser)]
#[command(name = "dsmd", version, about = "Distributed stochastic mirror descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write results.csv / report.json.
    Run(Common),
    /// Run one experiment per value of a sweep axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `schedule` (power exponents) or `topology` (network-1 graph kinds).
        #[arg(long)]
        axis: String,
    },
    /// Run the experiment and check every theoretical envelope.
    VerifyBounds(Common),
    /// Print graphs, mixing weights and decay constants.
    DumpTopology {
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Worker threads for independent sample paths.
    #[arg(long, env = "DSMD_WORKERS")]
    workers: Option<usize>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, env = "DSMD_OUT_DIR")]
    out: Option<PathBuf>,
    /// Added to the base run seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Recording stride (overrides `[output] thin`).
    #[arg(long)]
    thin: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions), Error> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(thin) = self.thin {
            cfg.output.thin = thin;
        }
        cfg.run.seed = cfg.run.seed.wrapping_add(self.seed_offset);
        cfg.validate()?;
        Ok((cfg, RunOptions { workers: self.workers }))
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_FAILURE,
    })
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, opts) = common.load()?;
            let report = run_experiment(&cfg, &opts)?;
            write_report(&report, &cfg.output.dir)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "wrote {} series x {} rounds to {} ({:.2}s)",
                report.series.len(),
                report.grid.len(),
                cfg.output.dir.display(),
                report.wall_clock_seconds
            );
            Ok(if report.ne_failed { ExitCode::from(EXIT_NONCONVERGENCE) } else { ExitCode::SUCCESS })
        }
        Command::Sweep { common, axis } => {
            let axis: SweepAxis = axis.parse()?;
            let (cfg, opts) = common.load()?;
            let cells = sweep(&cfg, axis, &opts)?;
            write_sweep(&cells, &cfg.output.dir)?;
            let mut failed = 0;
            for cell in &cells {
                match &cell.result {
                    Ok(r) => println!("{}: ok ({:.2}s)", cell.label, r.wall_clock_seconds),
                    Err(e) => {
                        failed += 1;
                        println!("{}: failed: {e}", cell.label);
                    }
                }
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
        }
        Command::VerifyBounds(common) => {
            let (cfg, opts) = common.load()?;
            let report = run_experiment(&cfg, &opts)?;
            write_report(&report, &cfg.output.dir)?;
            let verification = verify_bounds(&report);
            let json =
                serde_json::to_string_pretty(&verification).map_err(|e| Error::Serialization(e.to_string()))?;
            write_atomic(&cfg.output.dir.join("verification.json"), json.as_bytes())?;
            for c in &verification.checks {
                println!(
                    "{} {} {}: max margin {:e} at t={} ({} violations)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.envelope,
                    c.series_id,
                    c.max_margin,
                    c.worst_t,
                    c.violations
                );
            }
            Ok(if !verification.passed() {
                ExitCode::from(EXIT_VIOLATION)
            } else if report.ne_failed {
                ExitCode::from(EXIT_NONCONVERGENCE)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::DumpTopology { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            print!("{}", dump_topology(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    execute(cli).unwrap_or_else(|e| fail(&e))
}
