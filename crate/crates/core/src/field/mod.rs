//! Grid-sampled fields over the Lagrangian label domain.
//!
//! Two geometries are supported: a triply periodic box, and a channel that
//! is periodic in `x` and `y` with flat impermeable walls at `z = 0` and
//! `z = L_z`.  Node data is stored x-fastest: `i + n_x (j + n_y k)`.

mod fd;
mod norm;
pub(crate) mod ops;
mod resample;
pub mod snapshot;
pub(crate) mod spectral;

pub use fd::{first_derivative_weights, second_derivative_weights, CubicSpline, StencilRow};
pub use norm::{holder_norm, holder_norm_vector, HolderPairs};
pub use ops::{
    curl, dealias, dealias_vector, derivative, divergence, gradient, jacobian, laplacian, Jacobian,
};
pub use resample::{resample, FastInterpolator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Geometry {
    Periodic3D,
    Channel,
}

impl Geometry {
    pub fn code(self) -> u8 {
        match self {
            Geometry::Periodic3D => 0,
            Geometry::Channel => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Geometry::Periodic3D),
            1 => Some(Geometry::Channel),
            _ => None,
        }
    }
}

/// Smallest number of `z` nodes (walls included) for the wall stencils.
pub const MIN_CHANNEL_NZ: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelGrid {
    geometry: Geometry,
    dims: [usize; 3],
    lengths: [f64; 3],
}

impl LabelGrid {
    pub fn new(geometry: Geometry, dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "grid dims must be positive, got {dims:?}"
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid lengths must be positive, got {lengths:?}"
            )));
        }
        if geometry == Geometry::Channel && dims[2] < MIN_CHANNEL_NZ {
            return Err(Error::InvalidInput(format!(
                "channel needs at least {MIN_CHANNEL_NZ} z nodes including walls, got {}",
                dims[2]
            )));
        }
        Ok(Self {
            geometry,
            dims,
            lengths,
        })
    }

    pub fn periodic(dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        Self::new(Geometry::Periodic3D, dims, lengths)
    }

    pub fn channel(dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        Self::new(Geometry::Channel, dims, lengths)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Whether derivatives along `axis` are taken spectrally.
    pub fn is_periodic_axis(&self, axis: usize) -> bool {
        axis < 2 || self.geometry == Geometry::Periodic3D
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.is_periodic_axis(axis) {
            self.lengths[axis] / self.dims[axis] as f64
        } else {
            self.lengths[axis] / (self.dims[axis] - 1) as f64
        }
    }

    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        idx as f64 * self.spacing(axis)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn node(&self, idx: usize) -> [f64; 3] {
        let ijk = self.unravel(idx);
        [
            self.coord(0, ijk[0]),
            self.coord(1, ijk[1]),
            self.coord(2, ijk[2]),
        ]
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Wall node indices: bottom plane then top plane (empty when periodic).
    pub fn wall_nodes(&self) -> Vec<usize> {
        if self.geometry == Geometry::Periodic3D {
            return Vec::new();
        }
        let plane = self.plane_len();
        let top = (self.dims[2] - 1) * plane;
        (0..plane).chain(top..top + plane).collect()
    }

    /// Quadrature weight of each `z` level (trapezoid on the channel).
    pub fn z_weights(&self) -> Vec<f64> {
        let nz = self.dims[2];
        let h = self.spacing(2);
        (0..nz)
            .map(|k| {
                if self.geometry == Geometry::Channel && (k == 0 || k == nz - 1) {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect()
    }

    /// `sum f dV` in a fixed summation order.
    pub fn integrate(&self, data: &[f64]) -> f64 {
        let cell = self.spacing(0) * self.spacing(1);
        let plane = self.plane_len();
        self.z_weights()
            .iter()
            .enumerate()
            .map(|(k, w)| w * data[k * plane..(k + 1) * plane].iter().sum::<f64>())
            .sum::<f64>()
            * cell
    }

    pub fn mean(&self, data: &[f64]) -> f64 {
        self.integrate(data) / self.volume()
    }

    pub(crate) fn check_same(&self, other: &LabelGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: LabelGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: LabelGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "scalar field has {} values, grid has {} nodes",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "scalar field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_raw(grid: LabelGrid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: LabelGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: LabelGrid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let data = crate::par::map_indices(grid.len(), |idx| f(grid.node(idx)));
        Self { grid, data }
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: LabelGrid,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn new(grid: LabelGrid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::InvalidInput(format!(
                    "vector component has {} values, grid has {} nodes",
                    c.len(),
                    grid.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(
                    "vector field contains non-finite values".into(),
                ));
            }
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn from_raw(grid: LabelGrid, comps: [Vec<f64>; 3]) -> Self {
        Self { grid, comps }
    }

    pub fn zeros(grid: LabelGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn from_fn(grid: LabelGrid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let values = crate::par::map_indices(grid.len(), |idx| f(grid.node(idx)));
        let comps = std::array::from_fn(|c| values.iter().map(|v| v[c]).collect());
        Self { grid, comps }
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_comps(self) -> [Vec<f64>; 3] {
        self.comps
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// Largest absolute component value over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| max_abs(c)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let comps = std::array::from_fn(|c| self.comps[c].iter().map(|v| v * factor).collect());
        Self {
            grid: self.grid,
            comps,
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &VectorField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for c in 0..3 {
            for (a, b) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *a += factor * b;
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    /// Volume-weighted mean of each component.
    pub fn mean(&self) -> [f64; 3] {
        std::array::from_fn(|c| self.grid.mean(&self.comps[c]))
    }

    /// `sum |u|^2 / 2 dV`.
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = (0..self.grid.len())
            .map(|i| {
                let [a, b, c] = self.at(i);
                0.5 * (a * a + b * b + c * c)
            })
            .collect();
        self.grid.integrate(&sq)
    }
}

/// Values on the channel walls, ordered like [`LabelGrid::wall_nodes`]:
/// the bottom plane, then the top plane.  Empty on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WallField {
    grid: LabelGrid,
    values: Vec<f64>,
}

impl WallField {
    pub fn new(grid: LabelGrid, values: Vec<f64>) -> Result<Self> {
        let want = grid.wall_nodes().len();
        if values.len() != want {
            return Err(Error::InvalidInput(format!(
                "wall data has {} values, grid has {want} wall nodes",
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: LabelGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.wall_nodes().len()],
        }
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bottom(&self) -> &[f64] {
        &self.values[..self.values.len() / 2]
    }

    pub fn top(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

pub(crate) fn max_abs(data: &[f64]) -> f64 {
    data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Ordered Taylor coefficients `xi^(1)..xi^(S)` of the displacement `X - a`.
#[derive(Debug, Clone)]
pub struct TaylorSeries {
    coeffs: Vec<VectorField>,
    base_time: f64,
}

impl TaylorSeries {
    pub fn new(coeffs: Vec<VectorField>, base_time: f64) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| {
            Error::InvalidInput("a Taylor series needs at least one coefficient".into())
        })?;
        for c in &coeffs[1..] {
            first.grid().check_same(c.grid())?;
        }
        Ok(Self { coeffs, base_time })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn grid(&self) -> &LabelGrid {
        self.coeffs[0].grid()
    }

    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    /// `xi^(s)`, one-based.
    pub fn coeff(&self, s: usize) -> &VectorField {
        &self.coeffs[s - 1]
    }

    pub fn coeffs(&self) -> &[VectorField] {
        &self.coeffs
    }

    /// Displacement `sum xi^(s) t^s` (Horner).
    pub fn displacement(&self, t: f64) -> VectorField {
        self.horner(t, |_| 1.0, 1)
    }

    /// Lagrangian velocity `sum s xi^(s) t^{s-1}`.
    pub fn velocity(&self, t: f64) -> VectorField {
        self.horner(t, |s| s as f64, 0)
    }

    fn horner(&self, t: f64, weight: impl Fn(usize) -> f64, extra_power: i32) -> VectorField {
        let grid = *self.grid();
        let n = grid.len();
        let comps = std::array::from_fn(|c| {
            let mut acc = vec![0.0; n];
            for s in (1..=self.order()).rev() {
                let w = weight(s);
                let src = &self.coeffs[s - 1].comps[c];
                for (a, x) in acc.iter_mut().zip(src) {
                    *a = *a * t + w * x;
                }
            }
            if extra_power == 1 {
                acc.iter_mut().for_each(|a| *a *= t);
            }
            acc
        });
        VectorField::from_raw(grid, comps)
    }
}
