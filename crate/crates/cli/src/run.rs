//! The `run`, `check-weights`, `radius` and `oracle` commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cauchy_core::field::snapshot::Snapshot;
use cauchy_core::stepper::{
    coefficient_norms, compute_coefficients, radius_from_norms, run_until, SimState, StepReport,
    StepperConfig,
};
use cauchy_core::weights::{check_class_properties, denjoy_carleman, radius_from_cubic};
use serde_json::json;

use crate::config::SimulationConfig;
use crate::error::CliError;
use crate::oracle::oracle_trajectories;
use crate::presets::make_preset;

pub const RADIUS_FILE: &str = "radius.json";
/// Kmax used by `check-weights` when the run order is smaller.
const WEIGHT_CHECK_KMAX: usize = 20;

/// Header of the diagnostics CSV for Taylor order `order`.
pub fn csv_header(order: usize) -> String {
    let mut h = String::from(
        "step,time,dt,radius_est,cauchy_res,jacobian_res,boundary_res,energy,energy_drift",
    );
    for s in 1..=order {
        h.push_str(&format!(",coeff_norm_{s}"));
    }
    h
}

/// One CSV row.  `{:e}` prints the shortest round-trip representation.
pub fn csv_row(r: &StepReport) -> String {
    let mut row = format!(
        "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        r.step,
        r.time,
        r.dt_taken,
        r.radius_estimate,
        r.cauchy,
        r.jacobian,
        r.boundary,
        r.energy,
        r.energy_drift
    );
    for n in &r.coefficient_norms {
        row.push_str(&format!(",{n:e}"));
    }
    row
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub diagnostics: PathBuf,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn stepper_config(cfg: &SimulationConfig) -> Result<StepperConfig, CliError> {
    let mut sc = StepperConfig::new(
        cfg.taylor_order,
        cfg.time.cfl_fraction,
        cfg.weights.sequence(cfg.taylor_order)?,
    );
    sc.max_dt = cfg.time.max_dt;
    sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sc)
}

fn write_snapshot(dir: &Path, state: &SimState) -> Result<(), CliError> {
    let path = dir.join(format!("velocity_{:06}.clgf", state.step_index));
    Snapshot::from_vector(&state.velocity)
        .write(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_radius_report(cfg: &SimulationConfig, dir: &Path) -> Result<(), CliError> {
    if let Some(k) = &cfg.estimator.constants {
        let report = radius_from_cubic(k)?;
        let path = dir.join(RADIUS_FILE);
        let text = serde_json::to_string_pretty(&report).expect("plain struct serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
    }
    Ok(())
}

/// Runs the simulation, writing the diagnostics CSV, snapshots and the
/// radius report into the output directory.  Rows are flushed as they are
/// produced, so a failed run leaves every completed step on disk.
pub fn run(cfg: &SimulationConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let sc = stepper_config(cfg)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grid = cfg.grid()?;
    let (v0, _) = make_preset(cfg, grid)?;
    let state = SimState::new(v0, 0.0);

    write_radius_report(cfg, dir)?;
    let csv_path = dir.join(&cfg.output.diagnostics_file);
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(io_err(&csv_path))?);
    writeln!(csv, "{}", csv_header(cfg.taylor_order)).map_err(io_err(&csv_path))?;
    csv.flush().map_err(io_err(&csv_path))?;
    let every = cfg.output.snapshot_every;
    if every > 0 {
        write_snapshot(dir, &state)?;
    }

    let tol = cfg.residual_tolerance;
    let mut io_failure: Option<CliError> = None;
    let outcome = run_until(state, cfg.time.t_end, &sc, |s, r| {
        let written = writeln!(csv, "{}", csv_row(r))
            .and_then(|_| csv.flush())
            .map_err(io_err(&csv_path));
        let written = written.and_then(|_| {
            if every > 0 && s.step_index % every == 0 {
                write_snapshot(dir, s)
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            let msg = e.to_string();
            io_failure = Some(e);
            return Err(cauchy_core::Error::Numeric(msg));
        }
        let worst = r.cauchy.max(r.jacobian).max(r.boundary);
        if !(worst <= tol) {
            return Err(cauchy_core::Error::Numeric(format!(
                "step {}: residual {worst:e} exceeds the tolerance {tol:e}",
                r.step
            )));
        }
        Ok(())
    });
    drop(csv);
    if let Some(e) = io_failure {
        return Err(e);
    }
    if let Some(e) = outcome.failure {
        return Err(e.into());
    }
    Ok(RunSummary {
        steps: outcome.reports.len(),
        final_time: outcome.state.time,
        diagnostics: csv_path,
    })
}

/// Class properties and Denjoy–Carleman verdict of the configured weights.
pub fn check_weights(cfg: &SimulationConfig) -> Result<serde_json::Value, CliError> {
    let w = cfg
        .weights
        .sequence(cfg.taylor_order.max(WEIGHT_CHECK_KMAX))?;
    let class = check_class_properties(&w);
    let dc = denjoy_carleman(&w)?;
    Ok(json!({
        "weights": w.kind(),
        "kmax": w.kmax(),
        "class": class,
        "denjoy_carleman": dc,
    }))
}

/// Practical radius of the initial series, plus the cubic-majorant bound
/// when estimator constants are configured.
pub fn radius(cfg: &SimulationConfig) -> Result<serde_json::Value, CliError> {
    let grid = cfg.grid()?;
    let (v0, omega0) = make_preset(cfg, grid)?;
    let series = compute_coefficients(&v0, &omega0, cfg.taylor_order, None)?;
    let norms = coefficient_norms(&series, 0.5)?;
    let w = cfg.weights.sequence(cfg.taylor_order)?;
    let practical = radius_from_norms(&norms, &w)?;
    let cubic = match &cfg.estimator.constants {
        Some(k) => Some(radius_from_cubic(k)?),
        None => None,
    };
    Ok(json!({
        "practical_radius": if practical.is_finite() { json!(practical) } else { json!("inf") },
        "coefficient_norms": norms,
        "cubic_bound": cubic,
    }))
}

/// Largest distance between the truncated-series positions `a + xi(t, a)`
/// and the oracle trajectories, over all grid nodes.
pub fn oracle_deviation(cfg: &SimulationConfig, t: f64, tol: f64) -> Result<f64, CliError> {
    let grid = cfg.grid()?;
    let (v0, omega0) = make_preset(cfg, grid)?;
    let labels: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let exact = oracle_trajectories(cfg, &labels, t, tol)?;
    let series = compute_coefficients(&v0, &omega0, cfg.taylor_order, None)?;
    let disp = series.displacement(t);
    Ok((0..grid.len())
        .map(|i| {
            let d = disp.at(i);
            (0..3)
                .map(|c| (labels[i][c] + d[c] - exact[i][c]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}
