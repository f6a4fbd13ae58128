//! Evaluation of grid fields at arbitrary label positions.
//!
//! [`resample`] is exact for resolved Fourier content (trigonometric
//! interpolation along periodic axes, not-a-knot cubic spline across the
//! channel) and costs `O(N)` per point.  [`FastInterpolator`] serves whole-grid
//! map inversion: it upsamples spectrally by a factor of two and then uses
//! eight-point Lagrange interpolation on the fine grid.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::fd::CubicSpline;
use super::spectral::{signed_mode, Spectrum};
use super::{Geometry, LabelGrid, VectorField};
use crate::error::{Error, Result};
use crate::par;

/// Tolerance for points slightly outside the channel.
const WALL_SLACK: f64 = 1e-12;

/// Per-axis Fourier factors `e^{i k x}`, with the Nyquist bin as `cos`.
fn axis_factors(n: usize, length: f64, x: f64) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let s = signed_mode(m, n);
            let arg = 2.0 * PI * s as f64 * x / length;
            if n.is_multiple_of(2) && m == n / 2 {
                Complex64::new(arg.cos(), 0.0)
            } else {
                Complex64::new(arg.cos(), arg.sin())
            }
        })
        .collect()
}

fn clamp_wall(grid: &LabelGrid, z: f64) -> Result<f64> {
    let lz = grid.lengths()[2];
    if z < -WALL_SLACK || z > lz + WALL_SLACK || !z.is_finite() {
        return Err(Error::InvalidInput(format!(
            "point z = {z} lies outside the channel [0, {lz}]"
        )));
    }
    Ok(z.clamp(0.0, lz))
}

/// Values of `u` at arbitrary positions.
pub fn resample(u: &VectorField, points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let grid = *u.grid();
    if grid.geometry() == Geometry::Channel {
        for p in points {
            clamp_wall(&grid, p[2])?;
        }
    }
    let specs: Vec<Spectrum> = (0..3)
        .map(|c| Spectrum::forward(&grid, u.comp(c)))
        .collect();
    let [nx, ny, nz] = grid.dims();
    let l = grid.lengths();
    let norm_xy = 1.0 / (nx * ny) as f64;
    let spline = match grid.geometry() {
        Geometry::Channel => Some(CubicSpline::new(nz, grid.spacing(2))?),
        Geometry::Periodic3D => None,
    };
    let out = par::map_indices(points.len(), |pi| {
        let p = points[pi];
        let ex = axis_factors(nx, l[0], p[0]);
        let ey = axis_factors(ny, l[1], p[1]);
        // per-z-level trigonometric sums in the plane
        let plane_sums = |spec: &Spectrum| -> Vec<f64> {
            (0..nz)
                .map(|k| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..ny {
                        let row = &spec.data[grid.index(0, j, k)..grid.index(0, j, k) + nx];
                        let mut r = Complex64::new(0.0, 0.0);
                        for (c, e) in row.iter().zip(&ex) {
                            r += c * e;
                        }
                        acc += r * ey[j];
                    }
                    acc.re * norm_xy
                })
                .collect()
        };
        std::array::from_fn(|c| {
            let spec = &specs[c];
            match &spline {
                None => {
                    // z is also spectral: redo the sum with complex levels
                    let ez = axis_factors(nz, l[2], p[2]);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..nz {
                        let mut lvl = Complex64::new(0.0, 0.0);
                        for j in 0..ny {
                            let start = grid.index(0, j, k);
                            let mut r = Complex64::new(0.0, 0.0);
                            for (cv, e) in spec.data[start..start + nx].iter().zip(&ex) {
                                r += cv * e;
                            }
                            lvl += r * ey[j];
                        }
                        acc += lvl * ez[k];
                    }
                    acc.re / grid.len() as f64
                }
                Some(sp) => {
                    let col = plane_sums(spec);
                    let m = sp.moments(&col);
                    sp.eval(&col, &m, p[2].clamp(0.0, l[2]))
                }
            }
        })
    });
    Ok(out)
}

const UPSAMPLE: usize = 2;
const LAGRANGE_POINTS: usize = 8;

fn lagrange_weights(theta: f64) -> [f64; LAGRANGE_POINTS] {
    // nodes at -3..=4 relative to the lower neighbour
    let nodes: [f64; LAGRANGE_POINTS] = std::array::from_fn(|j| j as f64 - 3.0);
    std::array::from_fn(|j| {
        let mut w = 1.0;
        for (l, xl) in nodes.iter().enumerate() {
            if l != j {
                w *= (theta - xl) / (nodes[j] - xl);
            }
        }
        w
    })
}

/// Upsampled copy of a vector field for many-point interpolation.
#[derive(Debug, Clone)]
pub struct FastInterpolator {
    coarse: LabelGrid,
    fine: LabelGrid,
    comps: [Vec<f64>; 3],
    moments: Option<[Vec<f64>; 3]>,
    spline: Option<CubicSpline>,
}

impl FastInterpolator {
    pub fn new(u: &VectorField) -> Result<Self> {
        let coarse = *u.grid();
        let dims = coarse.dims();
        let fine_dims: [usize; 3] = std::array::from_fn(|a| {
            if coarse.is_periodic_axis(a) {
                dims[a] * UPSAMPLE
            } else {
                dims[a]
            }
        });
        let fine = LabelGrid::new(coarse.geometry(), fine_dims, coarse.lengths())?;
        let ratio = fine.len() as f64 / coarse.len() as f64;
        let comps: [Vec<f64>; 3] = std::array::from_fn(|c| {
            let spec = Spectrum::forward(&coarse, u.comp(c));
            let mut fine_spec = Spectrum {
                grid: fine,
                data: vec![Complex64::new(0.0, 0.0); fine.len()],
            };
            for idx in 0..coarse.len() {
                let ijk = coarse.unravel(idx);
                // fine targets per axis with Nyquist bins split in half
                let targets: [Vec<(usize, f64)>; 3] = std::array::from_fn(|a| {
                    if !coarse.is_periodic_axis(a) {
                        return vec![(ijk[a], 1.0)];
                    }
                    let n = dims[a];
                    let nf = fine_dims[a];
                    let s = signed_mode(ijk[a], n);
                    if n.is_multiple_of(2) && ijk[a] == n / 2 {
                        let h = (n / 2) as i64;
                        vec![(h as usize, 0.5), ((nf as i64 - h) as usize, 0.5)]
                    } else {
                        vec![(s.rem_euclid(nf as i64) as usize, 1.0)]
                    }
                });
                let v = spec.data[idx];
                for (ti, wi) in &targets[0] {
                    for (tj, wj) in &targets[1] {
                        for (tk, wk) in &targets[2] {
                            fine_spec.data[fine.index(*ti, *tj, *tk)] += v * (wi * wj * wk);
                        }
                    }
                }
            }
            fine_spec.inverse().into_iter().map(|v| v * ratio).collect()
        });
        let (moments, spline) = if coarse.geometry() == Geometry::Channel {
            let nz = dims[2];
            let sp = CubicSpline::new(nz, coarse.spacing(2))?;
            let plane = fine.plane_len();
            let moments = std::array::from_fn(|c| {
                let cols: Vec<Vec<f64>> = par::map_indices(plane, |col| {
                    let y: Vec<f64> = (0..nz).map(|k| comps[c][col + k * plane]).collect();
                    sp.moments(&y)
                });
                let mut m = vec![0.0; fine.len()];
                for (col, mc) in cols.iter().enumerate() {
                    for k in 0..nz {
                        m[col + k * plane] = mc[k];
                    }
                }
                m
            });
            (Some(moments), Some(sp))
        } else {
            (None, None)
        };
        Ok(Self {
            coarse,
            fine,
            comps,
            moments,
            spline,
        })
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.coarse
    }

    fn periodic_stencil(
        &self,
        axis: usize,
        x: f64,
    ) -> ([usize; LAGRANGE_POINTS], [f64; LAGRANGE_POINTS]) {
        let n = self.fine.dims()[axis];
        let h = self.fine.spacing(axis);
        let s = x / h;
        let base = s.floor();
        let theta = s - base;
        let base = base as i64;
        let idx = std::array::from_fn(|j| (base + j as i64 - 3).rem_euclid(n as i64) as usize);
        (idx, lagrange_weights(theta))
    }

    /// Interpolated value at `p`; channel `z` is clamped to the walls.
    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        let (ix, wx) = self.periodic_stencil(0, p[0]);
        let (iy, wy) = self.periodic_stencil(1, p[1]);
        let fine = &self.fine;
        match (&self.spline, &self.moments) {
            (Some(sp), Some(moments)) => {
                let z = p[2].clamp(0.0, self.coarse.lengths()[2]);
                let (k, a, b) = sp.locate(z);
                let h2 = sp.spacing() * sp.spacing() / 6.0;
                let (ca, cb) = ((a * a * a - a) * h2, (b * b * b - b) * h2);
                std::array::from_fn(|c| {
                    let (y, m) = (&self.comps[c], &moments[c]);
                    let mut acc = 0.0;
                    for (jj, wyj) in iy.iter().zip(&wy) {
                        let mut row = 0.0;
                        for (ii, wxi) in ix.iter().zip(&wx) {
                            let lo = fine.index(*ii, *jj, k);
                            let hi = fine.index(*ii, *jj, k + 1);
                            row += wxi * (a * y[lo] + b * y[hi] + ca * m[lo] + cb * m[hi]);
                        }
                        acc += wyj * row;
                    }
                    acc
                })
            }
            _ => {
                let (iz, wz) = self.periodic_stencil(2, p[2]);
                std::array::from_fn(|c| {
                    let y = &self.comps[c];
                    let mut acc = 0.0;
                    for (kk, wzk) in iz.iter().zip(&wz) {
                        let mut plane = 0.0;
                        for (jj, wyj) in iy.iter().zip(&wy) {
                            let mut row = 0.0;
                            for (ii, wxi) in ix.iter().zip(&wx) {
                                row += wxi * y[fine.index(*ii, *jj, *kk)];
                            }
                            plane += wyj * row;
                        }
                        acc += wzk * plane;
                    }
                    acc
                })
            }
        }
    }
}
