//! Initial conditions.
//!
//! Each preset returns a velocity that is divergence-free and tangent to
//! the walls, together with its discrete curl.  Coordinates are rescaled so
//! every preset is periodic on the configured box: `abc` uses
//! `2 pi x / L_x` in place of `x`, which is the textbook field on a `2 pi`
//! box.

use std::f64::consts::PI;

use cauchy_core::field::{curl, derivative};
use cauchy_core::{LabelGrid, ScalarField, VectorField};

use crate::config::{PresetName, SimulationConfig};
use crate::error::CliError;

/// Closed-form velocity of a preset at a point, or `None` when the preset
/// is only defined through discrete operators.
pub fn analytic_velocity(cfg: &SimulationConfig) -> Option<impl Fn([f64; 3]) -> [f64; 3] + Sync> {
    let p = &cfg.preset;
    let l = cfg.geometry.lengths;
    let k = [2.0 * PI / l[0], 2.0 * PI / l[1], 2.0 * PI / l[2]];
    let (a, b, c) = (p.param("A"), p.param("B"), p.param("C"));
    let u0 = p.param("U0");
    let name = p.name;
    let f = move |x: [f64; 3]| -> [f64; 3] {
        match name {
            PresetName::Abc => {
                let (sx, sy, sz) = (k[0] * x[0], k[1] * x[1], k[2] * x[2]);
                [
                    a * sz.sin() + c * sy.cos(),
                    b * sx.sin() + a * sz.cos(),
                    c * sy.sin() + b * sx.cos(),
                ]
            }
            PresetName::Shear => [u0 * (PI * x[2] / l[2]).sin(), 0.0, 0.0],
            PresetName::Zero | PresetName::ChannelVortex => [0.0; 3],
        }
    };
    match name {
        PresetName::ChannelVortex => None,
        _ => Some(f),
    }
}

/// Velocity and vorticity of the configured preset on `grid`.
pub fn make_preset(
    cfg: &SimulationConfig,
    grid: LabelGrid,
) -> Result<(VectorField, VectorField), CliError> {
    let v0 = match cfg.preset.name {
        PresetName::ChannelVortex => channel_vortex(cfg, grid)?,
        _ => {
            let f = analytic_velocity(cfg).expect("closed-form preset");
            VectorField::from_fn(grid, f)
        }
    };
    let omega0 = curl(&v0);
    Ok((v0, omega0))
}

/// `u = -D_z psi`, `w = D_x psi` with the same difference operators the
/// solver uses, so the discrete divergence cancels exactly.
fn channel_vortex(cfg: &SimulationConfig, grid: LabelGrid) -> Result<VectorField, CliError> {
    let [lx, _, lz] = cfg.geometry.lengths;
    let amp = cfg.preset.param("scale") * lx / (2.0 * PI);
    let psi = ScalarField::from_fn(grid, |p| {
        amp * (2.0 * PI * p[0] / lx).sin() * (PI * p[2] / lz).sin()
    });
    let u: Vec<f64> = derivative(&psi, 2).data().iter().map(|v| -v).collect();
    let w = derivative(&psi, 0).into_data();
    Ok(VectorField::new(grid, [u, vec![0.0; grid.len()], w])?)
}
