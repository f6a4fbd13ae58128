//! Independent trajectory oracle: adaptive Dormand–Prince 5(4) integration
//! of `dX/dt = v0(X)`, valid for presets that are steady Euler solutions.

use crate::config::{PresetName, SimulationConfig};
use crate::error::CliError;
use crate::presets::analytic_velocity;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates the autonomous system `x' = f(x)` from `x0` over `[0, t]`
/// with mixed absolute/relative local tolerance `tol`.
pub fn dopri5(
    f: impl Fn([f64; 3]) -> [f64; 3],
    x0: [f64; 3],
    t: f64,
    tol: f64,
) -> Result<[f64; 3], CliError> {
    if t == 0.0 {
        return Ok(x0);
    }
    let dir = t.signum();
    let span = t.abs();
    let mut x = x0;
    let mut done = 0.0;
    let mut h = (tol.powf(0.2) * 0.1).min(span);
    let mut k1 = f(x);
    let mut rejected = 0usize;
    while done < span {
        if span - done < h {
            h = span - done;
        }
        let mut k = [[0.0; 3]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut y = x;
            for (j, kj) in k.iter().enumerate().take(s) {
                for c in 0..3 {
                    y[c] += dir * h * A[s][j] * kj[c];
                }
            }
            k[s] = f(y);
        }
        let mut x5 = x;
        let mut err = 0.0f64;
        for c in 0..3 {
            let (mut d5, mut d4) = (0.0, 0.0);
            for s in 0..7 {
                d5 += B5[s] * k[s][c];
                d4 += B4[s] * k[s][c];
            }
            x5[c] += dir * h * d5;
            let scale = tol * (1.0 + x[c].abs().max(x5[c].abs()));
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        if err <= 1.0 {
            done += h;
            x = x5;
            // first-same-as-last: the seventh stage is f at the new point
            k1 = k[6];
        } else {
            rejected += 1;
            if rejected > 100_000 {
                return Err(CliError::Numeric("oracle integration stalled".into()));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * span {
            return Err(CliError::Numeric("oracle step size underflow".into()));
        }
    }
    Ok(x)
}

/// Positions at time `t` of the particles starting at `labels`.
pub fn oracle_trajectories(
    cfg: &SimulationConfig,
    labels: &[[f64; 3]],
    t: f64,
    tol: f64,
) -> Result<Vec<[f64; 3]>, CliError> {
    match cfg.preset.name {
        PresetName::Abc | PresetName::Shear | PresetName::Zero => {}
        other => {
            return Err(CliError::Config(format!(
                "the trajectory oracle needs a steady closed-form preset, \"{other}\" is not one"
            )))
        }
    }
    let v = analytic_velocity(cfg).expect("closed-form preset");
    labels.iter().map(|&a| dopri5(&v, a, t, tol)).collect()
}
