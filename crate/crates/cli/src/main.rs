#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cauchy_cli::oracle::DEFAULT_TOLERANCE;
use cauchy_cli::{load_config, run, CliError, SimulationConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cauchy",
    version,
    about = "Lagrangian time-Taylor solver for incompressible Euler"
)]
struct Cli {
    /// Worker threads for the data-parallel kernels (default: all cores).
    #[cfg(feature = "parallel")]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and radius report.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the weight-class properties and the Denjoy–Carleman verdict.
    CheckWeights {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the radius of convergence of the initial series.
    Radius {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare truncated-series positions with integrated trajectories.
    Oracle {
        config: PathBuf,
        /// Time at which to compare.
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, out: &Option<PathBuf>) -> Result<SimulationConfig, CliError> {
    let mut cfg = load_config(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

/// Prints `value` and, when `--out` was given, saves it as `name` there.
fn emit(value: serde_json::Value, out: &Option<PathBuf>, name: &str) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&value).expect("json value serializes");
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text + "\n")?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out } => {
            let cfg = load(&config, &out)?;
            let summary = run::run(&cfg)?;
            println!(
                "completed {} steps to t = {}; diagnostics in {}",
                summary.steps,
                summary.final_time,
                summary.diagnostics.display()
            );
            Ok(())
        }
        Command::CheckWeights { config, out } => {
            let cfg = load(&config, &out)?;
            emit(run::check_weights(&cfg)?, &out, "weights.json")
        }
        Command::Radius { config, out } => {
            let cfg = load(&config, &out)?;
            emit(run::radius(&cfg)?, &out, run::RADIUS_FILE)
        }
        Command::Oracle { config, t, out } => {
            let cfg = load(&config, &out)?;
            if !t.is_finite() {
                return Err(CliError::Config(format!("--t must be finite, got {t}")));
            }
            let dev = run::oracle_deviation(&cfg, t, DEFAULT_TOLERANCE)?;
            emit(
                serde_json::json!({ "t": t, "tolerance": DEFAULT_TOLERANCE, "max_deviation": dev }),
                &out,
                "oracle.json",
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
