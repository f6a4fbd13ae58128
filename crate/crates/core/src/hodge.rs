//! Poisson solves and the reconstruction of a vector field from its
//! divergence, curl and wall-normal trace.
//!
//! On the periodic box everything is diagonal in Fourier space.  In the
//! channel each horizontal Fourier mode `(k_x, k_y)` gives a banded
//! two-point problem in `z` (fourth-order differences, direct LU).
//!
//! For the reconstruction in the channel the field is written as
//! `xi = grad_h alpha + curl_h beta + xi_z e_z` per mode: `xi_z` solves
//! `(D_zz - K^2) xi_z = D d - (i k_x c_y - i k_y c_x)` with the wall trace
//! as Dirichlet data, then `alpha = (D xi_z - d) / K^2` and
//! `beta = -c_z / K^2`.  This reproduces `d`, `c_z` and the trace exactly
//! on the grid.  The horizontal mean (`K = 0`) profiles of `xi_x`, `xi_y`
//! come from `D xi_x = c_y`, `-D xi_y = c_x` with a prescribed mean.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ops::dz_fd;
use crate::field::spectral::{derivative_wavenumbers, laplacian_wavenumbers, Spectrum};
use crate::field::{
    first_derivative_weights, second_derivative_weights, Geometry, LabelGrid, ScalarField,
    StencilRow, VectorField, WallField,
};
use crate::linalg::BandedLu;
use crate::par;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative divergence-theorem defect above which a Neumann problem is
/// rejected as incompatible.
pub const INCOMPATIBLE_TOL: f64 = 1e-3;

/// Data for one reconstruction.  `neumann_data` is `xi . nu` with `nu` the
/// chart normal (pointing into the fluid); `mean` fixes the volume mean of
/// the components the data leave free (all three on the periodic box, `x`
/// and `y` in the channel).
#[derive(Debug, Clone)]
pub struct HodgeProblem {
    pub div_data: ScalarField,
    pub curl_data: VectorField,
    pub neumann_data: WallField,
    pub mean: [f64; 3],
}

impl HodgeProblem {
    pub fn new(
        div_data: ScalarField,
        curl_data: VectorField,
        neumann_data: WallField,
        mean: [f64; 3],
    ) -> Result<Self> {
        let g = *div_data.grid();
        g.check_same(curl_data.grid())?;
        g.check_same(neumann_data.grid())?;
        Ok(Self {
            div_data,
            curl_data,
            neumann_data,
            mean,
        })
    }

    pub fn grid(&self) -> &LabelGrid {
        self.div_data.grid()
    }

    pub fn geometry(&self) -> Geometry {
        self.grid().geometry()
    }

    /// Volume-mean divergence-theorem defect `(int d dV + oint g dA) / V`
    /// (zero on the periodic box).  `g` is measured along the inward normal.
    pub fn compatibility_defect(&self) -> f64 {
        compatibility(self.div_data.data(), &self.neumann_data).0
    }
}

/// `(defect, scale)`: volume-mean defect and the matching mean magnitude.
fn compatibility(div: &[f64], g: &WallField) -> (f64, f64) {
    let grid = *g.grid();
    let area = grid.spacing(0) * grid.spacing(1);
    let vol = grid.volume();
    let flux: f64 = g.values().iter().sum::<f64>() * area;
    let abs_flux: f64 = g.values().iter().map(|v| v.abs()).sum::<f64>() * area;
    let abs_div: Vec<f64> = div.iter().map(|v| v.abs()).collect();
    let total = grid.integrate(div);
    let scale = grid.integrate(&abs_div) + abs_flux;
    ((total + flux) / vol, scale / vol)
}

fn columns_in(spec: &Spectrum) -> Vec<Vec<Complex64>> {
    let grid = spec.grid;
    let plane = grid.plane_len();
    let nz = grid.dims()[2];
    (0..plane)
        .map(|m| (0..nz).map(|k| spec.data[m + plane * k]).collect())
        .collect()
}

fn columns_out(grid: LabelGrid, cols: &[Vec<Complex64>]) -> Vec<f64> {
    let plane = grid.plane_len();
    let mut data = vec![ZERO; grid.len()];
    for (m, col) in cols.iter().enumerate() {
        for (k, v) in col.iter().enumerate() {
            data[m + plane * k] = *v;
        }
    }
    Spectrum { grid, data }.inverse()
}

/// Horizontal spectra of the bottom and top wall data.
fn wall_spectra(g: &WallField) -> (Vec<Complex64>, Vec<Complex64>) {
    let grid = *g.grid();
    let plane = grid.plane_len();
    let top = grid.len() - plane;
    let mut buf = vec![0.0; grid.len()];
    buf[..plane].copy_from_slice(g.bottom());
    buf[top..].copy_from_slice(g.top());
    let spec = Spectrum::forward(&grid, &buf);
    (spec.data[..plane].to_vec(), spec.data[top..].to_vec())
}

/// Wall-normal difference matrices, scaled to the grid spacing.
struct ZOps {
    n: usize,
    d1: Vec<Vec<(usize, f64)>>,
    d2: Vec<Vec<(usize, f64)>>,
    weights: Vec<f64>,
}

impl ZOps {
    fn new(grid: &LabelGrid) -> Self {
        let n = grid.dims()[2];
        let h = grid.spacing(2);
        let expand = |rows: Vec<StencilRow>, scale: f64| -> Vec<Vec<(usize, f64)>> {
            rows.into_iter()
                .map(|r| {
                    r.weights
                        .iter()
                        .enumerate()
                        .map(|(j, w)| (r.start + j, w * scale))
                        .collect()
                })
                .collect()
        };
        Self {
            n,
            d1: expand(first_derivative_weights(n), 1.0 / h),
            d2: expand(second_derivative_weights(n), 1.0 / (h * h)),
            weights: grid.z_weights(),
        }
    }

    fn dense_d1(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (r, row) in self.d1.iter().enumerate() {
            for (c, w) in row {
                a[r * n + c] = *w;
            }
        }
        a
    }

    fn apply_d1(&self, col: &[Complex64]) -> Vec<Complex64> {
        self.d1
            .iter()
            .map(|row| row.iter().map(|(j, w)| col[*j] * *w).sum())
            .collect()
    }

    /// `D_zz - k2` on interior rows; wall rows from `wall_row`.
    fn helmholtz(
        &self,
        k2: f64,
        wall_row: impl Fn(usize) -> Vec<(usize, f64)>,
    ) -> Result<BandedLu> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            let entries = if r == 0 || r == n - 1 {
                wall_row(r)
            } else {
                self.d2[r].clone()
            };
            for (c, w) in entries {
                a[r * n + c] += w;
            }
            if r != 0 && r != n - 1 {
                a[r * n + r] -= k2;
            }
        }
        BandedLu::factor(n, a, 4, 4)
    }

    /// Bordered system `[M e; w^T 0]` where `M` has rows `rows` and `e`
    /// marks the rows that take the multiplier.
    fn bordered(
        &self,
        rows: &[Vec<(usize, f64)>],
        multiplier_rows: impl Fn(usize) -> bool,
    ) -> Result<BandedLu> {
        let n = self.n;
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for (r, row) in rows.iter().enumerate() {
            for (c, w) in row {
                a[r * m + c] += w;
            }
            if multiplier_rows(r) {
                a[r * m + n] = 1.0;
            }
        }
        for (c, w) in self.weights.iter().enumerate() {
            a[n * m + c] = *w;
        }
        BandedLu::factor(m, a, m, m)
    }
}

/// Least-squares solution of `D u = c` with a prescribed weighted sum:
/// the normal equations `D^T D u + w lambda = D^T c`, `w . u = target`.
/// Exact whenever `c` lies in the range of `D`.
struct MeanProfileSolver<'a> {
    ops: &'a ZOps,
    lu: BandedLu,
}

impl<'a> MeanProfileSolver<'a> {
    fn new(ops: &'a ZOps) -> Result<Self> {
        let n = ops.n;
        let dense = ops.dense_d1();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| (c, (0..n).map(|k| dense[k * n + r] * dense[k * n + c]).sum()))
                    .collect()
            })
            .collect();
        Ok(Self {
            ops,
            lu: ops.bordered(&rows, |_| true)?,
        })
    }

    fn solve(&self, c: &[Complex64], target: Complex64) -> Vec<Complex64> {
        let n = self.ops.n;
        let dense = self.ops.dense_d1();
        let mut b: Vec<Complex64> = (0..n)
            .map(|r| (0..n).map(|k| c[k] * dense[k * n + r]).sum())
            .collect();
        b.push(target);
        self.lu.solve_complex_in_place(&mut b);
        b.truncate(n);
        b
    }
}

/// `Delta phi = rhs` with `d phi / d nu = g` on the walls (`nu` inward) and
/// zero mean.  On the periodic box `g` must be empty and the mean of `rhs`
/// is ignored.
pub fn solve_neumann(rhs: &ScalarField, g: &WallField) -> Result<ScalarField> {
    let grid = *rhs.grid();
    grid.check_same(g.grid())?;
    if grid.geometry() == Geometry::Periodic3D {
        return Ok(ScalarField::from_raw(
            grid,
            periodic_inverse_laplacian(&grid, rhs.data()),
        ));
    }
    let (defect, scale) = compatibility(rhs.data(), g);
    if defect.abs() > INCOMPATIBLE_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "Neumann data incompatible: volume-mean defect {defect:.3e} against scale {scale:.3e}"
        )));
    }
    let ops = ZOps::new(&grid);
    let n = ops.n;
    let dims = grid.dims();
    let lens = grid.lengths();
    let kx2 = laplacian_wavenumbers(dims[0], lens[0]);
    let ky2 = laplacian_wavenumbers(dims[1], lens[1]);
    let cols = columns_in(&Spectrum::forward(&grid, rhs.data()));
    let (gb, gt) = wall_spectra(g);
    let plane = grid.plane_len();
    let wall_row = |r: usize| -> Vec<(usize, f64)> {
        if r == 0 {
            ops.d1[0].clone()
        } else {
            ops.d1[n - 1].iter().map(|(c, w)| (*c, -w)).collect()
        }
    };
    let solved: Vec<Result<Vec<Complex64>>> = par::map_indices(plane, |m| {
        let (i, j) = (m % dims[0], m / dims[0]);
        let mut b = cols[m].clone();
        b[0] = gb[m];
        b[n - 1] = gt[m];
        if m == 0 {
            // constant mode: the mean defect is removed, the multiplier
            // absorbs what remains of the discrete mismatch
            let shift = defect * plane as f64;
            for v in &mut b[1..n - 1] {
                *v -= shift;
            }
            let rows: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|r| {
                    if r == 0 || r == n - 1 {
                        wall_row(r)
                    } else {
                        ops.d2[r].clone()
                    }
                })
                .collect();
            let lu = ops.bordered(&rows, |r| r != 0 && r != n - 1)?;
            b.push(ZERO);
            lu.solve_complex_in_place(&mut b);
            b.truncate(n);
            return Ok(b);
        }
        let lu = ops.helmholtz(kx2[i] + ky2[j], wall_row)?;
        lu.solve_complex_in_place(&mut b);
        Ok(b)
    });
    let cols = solved.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ScalarField::from_raw(grid, columns_out(grid, &cols)))
}

/// `Delta Phi = rhs` componentwise with `Phi = 0` on the walls; zero mean
/// on the periodic box.
pub fn solve_dirichlet(rhs: &VectorField) -> Result<VectorField> {
    let grid = *rhs.grid();
    if grid.geometry() == Geometry::Periodic3D {
        return Ok(VectorField::from_raw(
            grid,
            std::array::from_fn(|c| periodic_inverse_laplacian(&grid, rhs.comp(c))),
        ));
    }
    let ops = ZOps::new(&grid);
    let n = ops.n;
    let dims = grid.dims();
    let lens = grid.lengths();
    let kx2 = laplacian_wavenumbers(dims[0], lens[0]);
    let ky2 = laplacian_wavenumbers(dims[1], lens[1]);
    let plane = grid.plane_len();
    let factors: Vec<Result<BandedLu>> = par::map_indices(plane, |m| {
        ops.helmholtz(kx2[m % dims[0]] + ky2[m / dims[0]], |r| vec![(r, 1.0)])
    });
    let factors = factors.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out: [Vec<f64>; 3] = Default::default();
    for (c, slot) in out.iter_mut().enumerate() {
        let cols = columns_in(&Spectrum::forward(&grid, rhs.comp(c)));
        let solved = par::map_indices(plane, |m| {
            let mut b = cols[m].clone();
            b[0] = ZERO;
            b[n - 1] = ZERO;
            factors[m].solve_complex_in_place(&mut b);
            b
        });
        *slot = columns_out(grid, &solved);
    }
    Ok(VectorField::from_raw(grid, out))
}

fn periodic_inverse_laplacian(grid: &LabelGrid, data: &[f64]) -> Vec<f64> {
    let dims = grid.dims();
    let lens = grid.lengths();
    let k2: Vec<Vec<f64>> = (0..3)
        .map(|a| laplacian_wavenumbers(dims[a], lens[a]))
        .collect();
    let spec = Spectrum::forward(grid, data);
    spec.map(|i, j, k, v| {
        let s = k2[0][i] + k2[1][j] + k2[2][k];
        if s == 0.0 {
            ZERO
        } else {
            -v / s
        }
    })
    .inverse()
}

/// The field with the given divergence, curl, wall trace and mean.
pub fn hodge_reconstruct(p: &HodgeProblem) -> Result<VectorField> {
    match p.geometry() {
        Geometry::Periodic3D => Ok(reconstruct_periodic(p)),
        Geometry::Channel => reconstruct_channel(p),
    }
}

fn reconstruct_periodic(p: &HodgeProblem) -> VectorField {
    let grid = *p.grid();
    let dims = grid.dims();
    let lens = grid.lengths();
    let kd: Vec<Vec<f64>> = (0..3)
        .map(|a| derivative_wavenumbers(dims[a], lens[a]))
        .collect();
    let d = Spectrum::forward(&grid, p.div_data.data());
    let c: Vec<Spectrum> = (0..3)
        .map(|a| Spectrum::forward(&grid, p.curl_data.comp(a)))
        .collect();
    let n = grid.len() as f64;
    let comps = std::array::from_fn(|a| {
        let (b, e) = ((a + 1) % 3, (a + 2) % 3);
        d.map(|i, j, k, dv| {
            let kv = [kd[0][i], kd[1][j], kd[2][k]];
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if i == 0 && j == 0 && k == 0 {
                return Complex64::new(p.mean[a] * n, 0.0);
            }
            if k2 == 0.0 {
                return ZERO;
            }
            let idx = grid.index(i, j, k);
            // grad phi + curl Phi with phi = -d/k^2, Phi = c/k^2
            let cross = kv[b] * c[e].data[idx] - kv[e] * c[b].data[idx];
            (-I * kv[a] * dv + I * cross) / k2
        })
        .inverse()
    });
    VectorField::from_raw(grid, comps)
}

fn reconstruct_channel(p: &HodgeProblem) -> Result<VectorField> {
    let grid = *p.grid();
    let ops = ZOps::new(&grid);
    let n = ops.n;
    let dims = grid.dims();
    let lens = grid.lengths();
    let plane = grid.plane_len();
    let kx = derivative_wavenumbers(dims[0], lens[0]);
    let ky = derivative_wavenumbers(dims[1], lens[1]);
    let div = p.div_data.data();
    let d_cols = columns_in(&Spectrum::forward(&grid, div));
    let dd_cols = columns_in(&Spectrum::forward(&grid, &dz_fd(&grid, div)));
    let c_cols: Vec<Vec<Vec<Complex64>>> = (0..3)
        .map(|a| columns_in(&Spectrum::forward(&grid, p.curl_data.comp(a))))
        .collect();
    let (gb, gt) = wall_spectra(&p.neumann_data);
    let dirichlet_walls = |r: usize| vec![(r, 1.0)];
    let profile = MeanProfileSolver::new(&ops)?;
    let mean_target = |a: usize| Complex64::new(p.mean[a] * plane as f64 * lens[2], 0.0);

    let solved: Vec<Result<[Vec<Complex64>; 3]>> = par::map_indices(plane, |m| {
        let (i, j) = (m % dims[0], m / dims[0]);
        let k2 = kx[i] * kx[i] + ky[j] * ky[j];
        if m != 0 && k2 == 0.0 {
            return Ok([vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]]);
        }
        let (cx, cy, cz) = (&c_cols[0][m], &c_cols[1][m], &c_cols[2][m]);
        let mut xz: Vec<Complex64> = (0..n)
            .map(|k| dd_cols[m][k] - I * (kx[i] * cy[k] - ky[j] * cx[k]))
            .collect();
        xz[0] = gb[m];
        xz[n - 1] = -gt[m];
        ops.helmholtz(k2, dirichlet_walls)?
            .solve_complex_in_place(&mut xz);
        if m == 0 {
            let xx = profile.solve(cy, mean_target(0));
            let minus_cx: Vec<Complex64> = cx.iter().map(|v| -v).collect();
            let xy = profile.solve(&minus_cx, mean_target(1));
            return Ok([xx, xy, xz]);
        }
        let dxz = ops.apply_d1(&xz);
        let mut xx = vec![ZERO; n];
        let mut xy = vec![ZERO; n];
        for k in 0..n {
            let alpha = (dxz[k] - d_cols[m][k]) / k2;
            let beta = -cz[k] / k2;
            xx[k] = I * kx[i] * alpha - I * ky[j] * beta;
            xy[k] = I * ky[j] * alpha + I * kx[i] * beta;
        }
        Ok([xx, xy, xz])
    });
    let solved = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let mut comps: [Vec<f64>; 3] = std::array::from_fn(|a| {
        let cols: Vec<Vec<Complex64>> = solved.iter().map(|s| s[a].clone()).collect();
        columns_out(grid, &cols)
    });
    // the wall trace is prescribed, so skip the transform round-off there
    let top = (n - 1) * plane;
    for w in 0..plane {
        comps[2][w] = p.neumann_data.bottom()[w];
        comps[2][top + w] = -p.neumann_data.top()[w];
    }
    Ok(VectorField::from_raw(grid, comps))
}
