//! FFT transforms along the periodic axes of a grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::LabelGrid;
use crate::par;

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Signed mode number of FFT bin `m` for `n` points.
#[inline]
pub(crate) fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Angular wavenumbers used for first derivatives (Nyquist bin zeroed).
pub(crate) fn derivative_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            if n.is_multiple_of(2) && m == n / 2 {
                0.0
            } else {
                2.0 * PI * signed_mode(m, n) as f64 / length
            }
        })
        .collect()
}

/// Squared wavenumbers for the Laplacian (Nyquist bin kept).
pub(crate) fn laplacian_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let k = 2.0 * PI * signed_mode(m, n) as f64 / length;
            k * k
        })
        .collect()
}

/// 2/3-rule mask: bins with `|m| > n/3` are removed.
pub(crate) fn dealias_mask(n: usize) -> Vec<bool> {
    (0..n)
        .map(|m| 3 * signed_mode(m, n).unsigned_abs() as usize <= n)
        .collect()
}

/// Complex spectrum over the periodic axes; non-periodic axes stay in
/// physical space.
#[derive(Clone, Debug)]
pub(crate) struct Spectrum {
    pub grid: LabelGrid,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn forward(grid: &LabelGrid, real: &[f64]) -> Self {
        let mut data: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..3 {
            if grid.is_periodic_axis(axis) && grid.dims()[axis] > 1 {
                transform_axis(grid, &mut data, axis, true);
            }
        }
        Self { grid: *grid, data }
    }

    pub fn inverse(mut self) -> Vec<f64> {
        let grid = self.grid;
        let mut scale = 1.0;
        for axis in 0..3 {
            if grid.is_periodic_axis(axis) && grid.dims()[axis] > 1 {
                transform_axis(&grid, &mut self.data, axis, false);
                scale /= grid.dims()[axis] as f64;
            }
        }
        self.data.iter().map(|c| c.re * scale).collect()
    }

    /// Multiplies each bin by `f(mx, my, mz)` where `m*` are bin indices
    /// along periodic axes (the physical `k` index along a wall-normal axis).
    pub fn apply(&mut self, f: impl Fn(usize, usize, usize) -> Complex64 + Sync) {
        let grid = self.grid;
        par::for_each_indexed(&mut self.data, |idx, v| {
            let [i, j, k] = grid.unravel(idx);
            *v *= f(i, j, k);
        });
    }

    pub fn map(&self, f: impl Fn(usize, usize, usize, Complex64) -> Complex64 + Sync) -> Self {
        let grid = self.grid;
        let data = par::map_indices(self.data.len(), |idx| {
            let [i, j, k] = grid.unravel(idx);
            f(i, j, k, self.data[idx])
        });
        Self { grid, data }
    }
}

fn transform_axis(grid: &LabelGrid, data: &mut [Complex64], axis: usize, forward: bool) {
    let dims = grid.dims();
    let n = dims[axis];
    let (fwd, inv) = plans(n);
    let plan = if forward { fwd } else { inv };
    if axis == 0 {
        par::for_each_chunk(data, n, |_, line| plan.process(line));
        return;
    }
    // Gather lines with `axis` fastest, transform, scatter back.
    let [nx, ny, _] = dims;
    let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
    {
        let src: &[Complex64] = data;
        par::for_each_chunk(&mut buf, n, |line_idx, line| {
            // line_idx enumerates the two remaining axes, lower axis fastest.
            let (i, j, k) = match axis {
                1 => (line_idx % nx, 0, line_idx / nx),
                _ => (line_idx % nx, line_idx / nx, 0),
            };
            for (l, v) in line.iter_mut().enumerate() {
                let idx = match axis {
                    1 => grid.index(i, l, k),
                    _ => grid.index(i, j, l),
                };
                *v = src[idx];
            }
            plan.process(line);
        });
    }
    let plane = nx * ny;
    par::for_each_chunk(data, plane, |k, slab| {
        for (off, v) in slab.iter_mut().enumerate() {
            let i = off % nx;
            let j = off / nx;
            let src = match axis {
                1 => buf[(i + nx * k) * n + j],
                _ => buf[(i + nx * j) * n + k],
            };
            *v = src;
        }
    });
}
