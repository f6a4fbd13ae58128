//! Time stepping by truncated Lagrangian Taylor series.
//!
//! Each step builds `xi^(1)..xi^(S)` from the current Eulerian velocity,
//! estimates the radius of convergence from the coefficient norms, sums the
//! series over `dt = cfl * radius`, maps the Lagrangian velocity back onto
//! the grid, and projects it onto divergence-free fields that are tangent
//! to the walls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::faadibruno::{
    boundary_normal_rhs, boundary_residual, BoundaryChart, ChannelChart, MAX_ORDER,
};
use crate::field::{
    curl, divergence, holder_norm_vector, jacobian, FastInterpolator, Geometry, HolderPairs,
    LabelGrid, ScalarField, TaylorSeries, VectorField, WallField,
};
use crate::hodge::{hodge_reconstruct, HodgeProblem};
use crate::par;
use crate::recursion::{
    cauchy_residual, det_identity_plus_minus_one, jacobian_residual, RecursionState,
};
use crate::weights::WeightSequence;

/// Tolerance on `div v0` and on the wall-normal velocity, relative to
/// `max(1, |v0|_inf)`.
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Fixed-point tolerance and iteration cap for the map inversion.
pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAX_ITERS: usize = 50;
/// Top-half norms at or below this fraction of the largest norm count as
/// vanishing.
pub const RADIUS_FLOOR: f64 = 1e-12;
/// How many times a step is halved after a failed map inversion.
const MAX_HALVINGS: usize = 8;

/// Current Eulerian state of a simulation.
#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub velocity: VectorField,
    pub vorticity: VectorField,
    pub step_index: usize,
}

impl SimState {
    pub fn new(velocity: VectorField, time: f64) -> Self {
        let vorticity = curl(&velocity);
        Self {
            time,
            velocity,
            vorticity,
            step_index: 0,
        }
    }

    pub fn grid(&self) -> &LabelGrid {
        self.velocity.grid()
    }
}

/// Diagnostics for one completed step.  `dt_taken` equals
/// `cfl_fraction * radius_estimate` unless capped by `max_dt` or by the
/// end time, or halved after a failed inversion.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub radius_estimate: f64,
    pub dt_taken: f64,
    pub cauchy: f64,
    pub jacobian: f64,
    pub boundary: f64,
    pub volume_defect: f64,
    pub energy: f64,
    pub energy_drift: f64,
    pub coefficient_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub order: usize,
    pub cfl_fraction: f64,
    pub max_dt: Option<f64>,
    pub weights: WeightSequence,
    pub holder_gamma: f64,
}

impl StepperConfig {
    pub fn new(order: usize, cfl_fraction: f64, weights: WeightSequence) -> Self {
        Self {
            order,
            cfl_fraction,
            max_dt: None,
            weights,
            holder_gamma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_ORDER).contains(&self.order) {
            return Err(Error::InvalidInput(format!(
                "taylor_order out of range [2,{MAX_ORDER}]"
            )));
        }
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "cfl_fraction must lie in (0, 0.5], got {}",
                self.cfl_fraction
            )));
        }
        if let Some(m) = self.max_dt {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "max_dt must be positive, got {m}"
                )));
            }
        }
        if self.weights.kmax() < self.order {
            return Err(Error::InvalidInput(format!(
                "weights stop at k = {}, order {} needs more",
                self.weights.kmax(),
                self.order
            )));
        }
        if !(self.holder_gamma > 0.0 && self.holder_gamma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "Hölder exponent must lie in (0, 1), got {}",
                self.holder_gamma
            )));
        }
        Ok(())
    }
}

fn at_order(order: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtOrder {
        order,
        source: Box::new(e),
    }
}

fn default_chart(grid: &LabelGrid) -> Result<Option<ChannelChart>> {
    match grid.geometry() {
        Geometry::Channel => Ok(Some(ChannelChart::new(*grid)?)),
        Geometry::Periodic3D => Ok(None),
    }
}

/// Checks the restart datum: divergence-free and tangent to the walls.
pub fn check_initial_velocity(v0: &VectorField) -> Result<()> {
    let grid = *v0.grid();
    let tol = CONSTRAINT_TOL * v0.max_abs().max(1.0);
    let div = divergence(v0).max_abs();
    if div > tol {
        return Err(Error::InvalidInput(format!(
            "initial velocity has divergence {div:.3e} above {tol:.1e}"
        )));
    }
    let wall = grid
        .wall_nodes()
        .iter()
        .map(|&i| v0.comp(2)[i].abs())
        .fold(0.0, f64::max);
    if wall > tol {
        return Err(Error::InvalidInput(format!(
            "initial velocity crosses the wall ({wall:.3e} above {tol:.1e})"
        )));
    }
    Ok(())
}

/// `xi^(1) = v0`, then every higher coefficient from its curl, divergence
/// and wall datum.  On a channel grid without an explicit chart the flat
/// channel chart is used.
pub fn compute_coefficients(
    v0: &VectorField,
    omega0: &VectorField,
    order: usize,
    chart: Option<&dyn BoundaryChart>,
) -> Result<TaylorSeries> {
    let grid = *v0.grid();
    grid.check_same(omega0.grid())?;
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "taylor_order out of range [2,{MAX_ORDER}]"
        )));
    }
    check_initial_velocity(v0)?;
    let fallback = default_chart(&grid)?;
    let chart: Option<&dyn BoundaryChart> = match chart {
        Some(c) => Some(c),
        None => fallback.as_ref().map(|c| c as &dyn BoundaryChart),
    };
    let mut coeffs = vec![v0.clone()];
    let mut state = RecursionState::new(omega0);
    for s in 2..=order {
        state.push(&coeffs[s - 2]).map_err(at_order(s))?;
        let c = state.curl_rhs();
        let d = state.div_rhs();
        let g = match chart {
            Some(ch) => boundary_normal_rhs(s, &coeffs, ch).map_err(at_order(s))?,
            None => WallField::zeros(grid),
        };
        let problem = HodgeProblem::new(d, c, g, [0.0; 3]).map_err(at_order(s))?;
        let xi = hodge_reconstruct(&problem).map_err(at_order(s))?;
        if xi.comps().iter().flatten().any(|v| !v.is_finite()) {
            return Err(at_order(s)(Error::Numeric("non-finite coefficient".into())));
        }
        coeffs.push(xi);
    }
    TaylorSeries::new(coeffs, 0.0)
}

/// `||xi^(s)||_{1,gamma}` for every coefficient.
pub fn coefficient_norms(series: &TaylorSeries, gamma: f64) -> Result<Vec<f64>> {
    let pairs = HolderPairs::new(series.grid());
    series
        .coeffs()
        .iter()
        .map(|c| holder_norm_vector(c, 1, gamma, &pairs))
        .collect()
}

/// Radius from precomputed norms: least-squares slope of
/// `log(norm_s / M_s)` over the upper half of the orders, `exp(-slope)`.
/// Infinite when the upper half has vanished.
pub fn radius_from_norms(norms: &[f64], w: &WeightSequence) -> Result<f64> {
    let order = norms.len();
    if order < 4 {
        return Err(Error::InvalidInput(format!(
            "radius estimate needs at least 4 orders, got {order}"
        )));
    }
    if w.kmax() < order {
        return Err(Error::InvalidInput(format!(
            "weights stop at k = {}, need {order}",
            w.kmax()
        )));
    }
    let largest = norms.iter().copied().fold(0.0, f64::max);
    let first = order.div_ceil(2);
    let top: Vec<(f64, f64)> = (first..=order)
        .map(|s| (s as f64, norms[s - 1] / w.get(s)))
        .collect();
    let floor = (RADIUS_FLOOR * largest).max(1e-300);
    if top.iter().all(|(_, v)| *v <= floor) {
        return Ok(f64::INFINITY);
    }
    let nonzero = norms.iter().filter(|v| **v > 0.0).count();
    if nonzero < 3 {
        return Err(Error::Numeric(format!(
            "only {nonzero} non-zero coefficient norms, need 3"
        )));
    }
    let pts: Vec<(f64, f64)> = top
        .into_iter()
        .filter(|(_, v)| *v > floor)
        .map(|(s, v)| (s, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Ok((-(sxy / sxx)).exp())
}

/// Practical radius of convergence of the series, in time units.
pub fn estimate_radius(series: &TaylorSeries, w: &WeightSequence, gamma: f64) -> Result<f64> {
    radius_from_norms(&coefficient_norms(series, gamma)?, w)
}

/// Mean of `det(grad X) - 1` at `dt`.
pub fn volume_defect(series: &TaylorSeries, dt: f64) -> f64 {
    let grid = *series.grid();
    let g = jacobian(&series.displacement(dt));
    let e = &g.entries;
    let dets = par::map_indices(grid.len(), |x| {
        let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|a| e[i][a][x]));
        det_identity_plus_minus_one(&m)
    });
    grid.mean(&dets)
}

/// Sums the series over `dt`, recovers the Eulerian velocity on the grid
/// and projects it.
pub fn advance(state: &SimState, series: &TaylorSeries, dt: f64) -> Result<SimState> {
    let grid = *state.grid();
    grid.check_same(series.grid())?;
    if dt == 0.0 {
        return Ok(SimState {
            step_index: state.step_index + 1,
            ..state.clone()
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let disp = FastInterpolator::new(&series.displacement(dt))?;
    let vel = FastInterpolator::new(&series.velocity(dt))?;
    let lz = grid.lengths()[2];
    let channel = grid.geometry() == Geometry::Channel;
    let labels: Vec<Result<[f64; 3]>> = par::map_indices(grid.len(), |idx| {
        let x = grid.node(idx);
        let mut a = x;
        for _ in 0..INVERSION_MAX_ITERS {
            let d = disp.eval(a);
            let mut next = [x[0] - d[0], x[1] - d[1], x[2] - d[2]];
            if channel {
                next[2] = next[2].clamp(0.0, lz);
            }
            let change = (0..3).map(|c| (next[c] - a[c]).abs()).fold(0.0, f64::max);
            a = next;
            if change <= INVERSION_TOL {
                return Ok(a);
            }
        }
        Err(Error::Numeric(format!(
            "map inversion did not converge in {INVERSION_MAX_ITERS} iterations at node {idx} (dt = {dt:e})"
        )))
    });
    let labels = labels.into_iter().collect::<Result<Vec<_>>>()?;
    let values = par::map_indices(grid.len(), |idx| vel.eval(labels[idx]));
    let comps: [Vec<f64>; 3] = std::array::from_fn(|c| values.iter().map(|v| v[c]).collect());
    let u = VectorField::new(grid, comps)?;
    let projected = project(&u)?;
    Ok(SimState {
        time: state.time + dt,
        vorticity: curl(&projected),
        velocity: projected,
        step_index: state.step_index + 1,
    })
}

/// Divergence-free, wall-tangent field with the curl and mean of `u`.
pub fn project(u: &VectorField) -> Result<VectorField> {
    let grid = *u.grid();
    let problem = HodgeProblem::new(
        ScalarField::zeros(grid),
        curl(u),
        WallField::zeros(grid),
        u.mean(),
    )?;
    hodge_reconstruct(&problem)
}

/// Result of [`run_until`]: the reports of every completed step, the last
/// state reached, and the error that stopped the run early, if any.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: SimState,
    pub reports: Vec<StepReport>,
    pub failure: Option<Error>,
}

/// Steps until `t_end`, calling `on_step` after each completed step.
pub fn run_until(
    state: SimState,
    t_end: f64,
    cfg: &StepperConfig,
    mut on_step: impl FnMut(&SimState, &StepReport) -> Result<()>,
) -> RunOutcome {
    let mut reports = Vec::new();
    if let Err(e) = cfg.validate() {
        return RunOutcome {
            state,
            reports,
            failure: Some(e),
        };
    }
    let initial_energy = state.velocity.energy();
    let mut state = state;
    let chart = match default_chart(state.grid()) {
        Ok(c) => c,
        Err(e) => {
            return RunOutcome {
                state,
                reports,
                failure: Some(e),
            }
        }
    };
    // guard against round-off leaving a sliver of time
    let eps = 1e-12 * t_end.abs().max(1.0);
    while state.time < t_end - eps {
        match step(&state, t_end, cfg, chart.as_ref(), initial_energy) {
            Ok((next, report)) => {
                state = next;
                let hook = on_step(&state, &report);
                reports.push(report);
                if let Err(e) = hook {
                    return RunOutcome {
                        state,
                        reports,
                        failure: Some(e),
                    };
                }
            }
            Err(e) => {
                return RunOutcome {
                    state,
                    reports,
                    failure: Some(e),
                }
            }
        }
    }
    RunOutcome {
        state,
        reports,
        failure: None,
    }
}

fn step(
    state: &SimState,
    t_end: f64,
    cfg: &StepperConfig,
    chart: Option<&ChannelChart>,
    initial_energy: f64,
) -> Result<(SimState, StepReport)> {
    let series = compute_coefficients(
        &state.velocity,
        &state.vorticity,
        cfg.order,
        chart.map(|c| c as &dyn BoundaryChart),
    )?;
    let norms = coefficient_norms(&series, cfg.holder_gamma)?;
    let radius = radius_from_norms(&norms, &cfg.weights)?;
    let mut dt = (cfg.cfl_fraction * radius).min(t_end - state.time);
    if let Some(m) = cfg.max_dt {
        dt = dt.min(m);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Numeric(format!(
            "no usable time step (radius {radius:e})"
        )));
    }
    let mut halvings = 0;
    let next = loop {
        match advance(state, &series, dt) {
            Ok(s) => break s,
            Err(Error::Numeric(msg))
                if msg.starts_with("map inversion") && halvings < MAX_HALVINGS =>
            {
                dt *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let energy = next.velocity.energy();
    let energy_drift = if initial_energy > 0.0 {
        (energy - initial_energy).abs() / initial_energy
    } else {
        (energy - initial_energy).abs()
    };
    let boundary = chart.map_or(0.0, |c| boundary_residual(&series, c, dt));
    let report = StepReport {
        step: next.step_index,
        time: next.time,
        radius_estimate: radius,
        dt_taken: dt,
        cauchy: cauchy_residual(&series, &state.vorticity, dt)?,
        jacobian: jacobian_residual(&series, dt),
        boundary,
        volume_defect: volume_defect(&series, dt),
        energy,
        energy_drift,
        coefficient_norms: norms,
    };
    Ok((next, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightKind;
    use std::f64::consts::PI;

    fn analytic(k: usize) -> WeightSequence {
        WeightSequence::new(WeightKind::Analytic, k).unwrap()
    }

    fn shear(grid: LabelGrid) -> VectorField {
        let lz = grid.lengths()[2];
        VectorField::from_fn(grid, |p| [(PI * p[2] / lz).sin(), 0.0, 0.0])
    }

    fn channel() -> LabelGrid {
        LabelGrid::channel([8, 4, 17], [2.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn geometric_norms_give_reciprocal_ratio() {
        let norms: Vec<f64> = (1..=8).map(|s| 0.5f64.powi(s)).collect();
        let r = radius_from_norms(&norms, &analytic(8)).unwrap();
        assert!((r - 2.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn vanishing_norms_give_infinite_radius() {
        let mut norms = vec![0.0; 8];
        norms[0] = 1.0;
        norms[1] = 1e-16;
        assert_eq!(
            radius_from_norms(&norms, &analytic(8)).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            radius_from_norms(&[0.0; 6], &analytic(8)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn radius_rejects_short_or_sparse_series() {
        assert!(radius_from_norms(&[1.0, 0.5, 0.25], &analytic(8)).is_err());
        let norms = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!(radius_from_norms(&norms, &analytic(8)).is_err());
    }

    #[test]
    fn shear_coefficients_vanish_beyond_first_order() {
        let g = channel();
        let v0 = shear(g);
        let series = compute_coefficients(&v0, &curl(&v0), 8, None).unwrap();
        for s in 2..=8 {
            assert!(
                series.coeff(s).max_abs() <= 1e-9,
                "order {s}: {}",
                series.coeff(s).max_abs()
            );
        }
    }

    #[test]
    fn zero_velocity_gives_zero_series() {
        let g = LabelGrid::periodic([8, 8, 8], [1.0; 3]).unwrap();
        let v0 = VectorField::zeros(g);
        let series = compute_coefficients(&v0, &v0, 5, None).unwrap();
        assert!(series.coeffs().iter().all(|c| c.max_abs() == 0.0));
    }

    #[test]
    fn rejects_divergent_or_penetrating_data() {
        let g = channel();
        let bad = VectorField::from_fn(g, |p| [p[0].sin(), 0.0, 0.0]);
        assert!(compute_coefficients(&bad, &curl(&bad), 4, None).is_err());
        let through = VectorField::from_fn(g, |_| [0.0, 0.0, 1.0]);
        assert!(compute_coefficients(&through, &curl(&through), 4, None).is_err());
    }

    #[test]
    fn zero_step_keeps_the_state() {
        let g = channel();
        let s0 = SimState::new(shear(g), 0.5);
        let series = compute_coefficients(&s0.velocity, &s0.vorticity, 4, None).unwrap();
        let s1 = advance(&s0, &series, 0.0).unwrap();
        assert_eq!(s1.velocity, s0.velocity);
        assert_eq!(s1.time, 0.5);
        assert_eq!(s1.step_index, 1);
    }

    #[test]
    fn shear_is_steady_under_advance() {
        let g = channel();
        let s0 = SimState::new(shear(g), 0.0);
        let series = compute_coefficients(&s0.velocity, &s0.vorticity, 4, None).unwrap();
        let s1 = advance(&s0, &series, 0.3).unwrap();
        let diff = s1.velocity.sub(&s0.velocity).unwrap().max_abs();
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn run_until_zero_time_takes_no_steps() {
        let g = channel();
        let out = run_until(
            SimState::new(shear(g), 0.0),
            0.0,
            &StepperConfig::new(4, 0.25, analytic(8)),
            |_, _| Ok(()),
        );
        assert!(out.failure.is_none());
        assert!(out.reports.is_empty());
    }

    #[test]
    fn shear_run_conserves_energy() {
        let g = channel();
        let cfg = StepperConfig {
            max_dt: Some(0.25),
            ..StepperConfig::new(4, 0.25, analytic(8))
        };
        let out = run_until(SimState::new(shear(g), 0.0), 1.0, &cfg, |_, _| Ok(()));
        assert!(out.failure.is_none(), "{:?}", out.failure);
        assert_eq!(out.reports.len(), 4);
        for r in &out.reports {
            assert!(r.energy_drift <= 1e-8);
            assert!(r.cauchy <= 1e-10 && r.jacobian <= 1e-10 && r.boundary <= 1e-12);
        }
        assert!((out.state.time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = StepperConfig::new(17, 0.25, analytic(20));
        assert!(cfg.validate().is_err());
        cfg.order = 8;
        assert!(cfg.validate().is_ok());
        cfg.cfl_fraction = 0.6;
        assert!(cfg.validate().is_err());
        cfg.cfl_fraction = 0.25;
        cfg.weights = analytic(4);
        assert!(cfg.validate().is_err());
    }
}
