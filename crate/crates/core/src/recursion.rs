//! Order-by-order right-hand sides of the Lagrangian Taylor recursion and the
//! residuals of the exact constraints.
//!
//! With `A^m[i][a] = d_i xi_a^(m)` the curl and divergence of `xi^(s)` are
//!
//! ```text
//! curl xi^(s) = omega0 [s = 1]
//!             - 1/2 sum_{0<m<s} (2m - s)/s  sum_k grad xi_k^(m) x grad xi_k^(s-m)
//! div  xi^(s) = sum_{i<j} sum_{0<m<s} (A^m_ij A^(s-m)_ji - A^m_ii A^(s-m)_jj)
//!             - 1/6 sum_{l+m+n=s} eps_ijk eps_abc A^l_ia A^m_jb A^n_kc
//! ```
//!
//! The cubic sum is split as `sum_l A^l : B^(s-l)` where
//! `B^(p) = sum_{m+n=p} C(A^m, A^n)` and `C(X, Y)_i = X_{i+1} x Y_{i+2} -
//! X_{i+2} x Y_{i+1}` (rows cyclic).  `B^(p)` depends only on coefficients
//! below `p`, so [`RecursionState`] builds each one once.

use crate::error::{Error, Result};
use crate::field::ops::{dealias_data, jacobian, Jacobian};
use crate::field::{LabelGrid, ScalarField, TaylorSeries, VectorField};
use crate::par;

/// Inputs for a single order `s`: the coefficients `xi^(1)..xi^(s-1)` and the
/// initial vorticity.
#[derive(Debug, Clone, Copy)]
pub struct RecursionInput<'a> {
    pub s: usize,
    pub coeffs: &'a [VectorField],
    pub omega0: &'a VectorField,
}

impl<'a> RecursionInput<'a> {
    pub fn new(s: usize, coeffs: &'a [VectorField], omega0: &'a VectorField) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidInput(
                "recursion order must be at least 1".into(),
            ));
        }
        if coeffs.len() != s - 1 {
            return Err(Error::InvalidInput(format!(
                "order {s} needs {} coefficients, got {}",
                s - 1,
                coeffs.len()
            )));
        }
        for c in coeffs {
            omega0.grid().check_same(c.grid())?;
        }
        Ok(Self { s, coeffs, omega0 })
    }
}

/// `[Vec; 3]` from a per-node closure returning three values.
fn map3(n: usize, f: impl Fn(usize) -> [f64; 3] + Sync) -> [Vec<f64>; 3] {
    let vals = par::map_indices(n, f);
    std::array::from_fn(|c| vals.iter().map(|v| v[c]).collect())
}

/// Accumulated gradients and cubic pair sums for the coefficients pushed so
/// far.  After `q` pushes it yields the right-hand sides for order `q + 1`.
#[derive(Debug, Clone)]
pub struct RecursionState {
    grid: LabelGrid,
    omega0: VectorField,
    jacobians: Vec<Jacobian>,
    // pair_sums[p - 2][i][a] holds B^(p)
    pair_sums: Vec<[[Vec<f64>; 3]; 3]>,
    reverse: bool,
}

impl RecursionState {
    pub fn new(omega0: &VectorField) -> Self {
        Self {
            grid: *omega0.grid(),
            omega0: omega0.clone(),
            jacobians: Vec::new(),
            pair_sums: Vec::new(),
            reverse: false,
        }
    }

    /// Same results, with every internal sum traversed in the opposite order.
    #[cfg(test)]
    fn reversed(mut self) -> Self {
        self.reverse = true;
        self
    }

    /// Order of the next coefficient.
    pub fn next_order(&self) -> usize {
        self.jacobians.len() + 1
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    fn indices(&self, range: std::ops::RangeInclusive<usize>) -> Vec<usize> {
        let mut v: Vec<usize> = range.collect();
        if self.reverse {
            v.reverse();
        }
        v
    }

    /// Appends `xi^(q)` for `q = next_order()`.
    pub fn push(&mut self, coeff: &VectorField) -> Result<()> {
        self.grid.check_same(coeff.grid())?;
        self.jacobians.push(jacobian(coeff));
        let q = self.jacobians.len();
        let p = q + 1;
        let grid = self.grid;
        let n = grid.len();
        let ms = self.indices(1..=q);
        let jac = &self.jacobians;
        let rows: [[Vec<f64>; 3]; 3] = std::array::from_fn(|i| {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let raw = map3(n, |x| {
                let mut acc = [0.0; 3];
                for &m in &ms {
                    let (u, v) = (&jac[m - 1].entries, &jac[p - m - 1].entries);
                    for (a, slot) in acc.iter_mut().enumerate() {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        // (U_{i1} x V_{i2} - U_{i2} x V_{i1})_a
                        *slot += u[i1][b][x] * v[i2][c][x]
                            - u[i1][c][x] * v[i2][b][x]
                            - (u[i2][b][x] * v[i1][c][x] - u[i2][c][x] * v[i1][b][x]);
                    }
                }
                acc
            });
            raw.map(|r| dealias_data(&grid, &r))
        });
        self.pair_sums.push(rows);
        Ok(())
    }

    /// Curl of the next coefficient.
    pub fn curl_rhs(&self) -> VectorField {
        let s = self.next_order();
        if s == 1 {
            return self.omega0.clone();
        }
        let grid = self.grid;
        let jac = &self.jacobians;
        let ms = self.indices(1..=s - 1);
        let raw = map3(grid.len(), |x| {
            let mut acc = [0.0; 3];
            for &m in &ms {
                let w = -0.5 * (2.0 * m as f64 - s as f64) / s as f64;
                if w == 0.0 {
                    continue;
                }
                let (u, v) = (&jac[m - 1].entries, &jac[s - m - 1].entries);
                for (c, slot) in acc.iter_mut().enumerate() {
                    let (p, q) = ((c + 1) % 3, (c + 2) % 3);
                    let mut t = 0.0;
                    for k in 0..3 {
                        t += u[p][k][x] * v[q][k][x] - u[q][k][x] * v[p][k][x];
                    }
                    *slot += w * t;
                }
            }
            acc
        });
        VectorField::from_raw(grid, raw.map(|r| dealias_data(&grid, &r)))
    }

    /// Divergence of the next coefficient.
    pub fn div_rhs(&self) -> ScalarField {
        let s = self.next_order();
        let grid = self.grid;
        if s <= 1 {
            return ScalarField::zeros(grid);
        }
        let jac = &self.jacobians;
        let ms = self.indices(1..=s - 1);
        let ls = if s >= 3 {
            self.indices(1..=s - 2)
        } else {
            Vec::new()
        };
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let raw = par::map_indices(grid.len(), |x| {
            let mut quad = 0.0;
            for &m in &ms {
                let (u, v) = (&jac[m - 1].entries, &jac[s - m - 1].entries);
                for &(i, j) in &pairs {
                    quad += u[i][j][x] * v[j][i][x] - u[i][i][x] * v[j][j][x];
                }
            }
            let mut cubic = 0.0;
            for &l in &ls {
                let (u, b) = (&jac[l - 1].entries, &self.pair_sums[s - l - 2]);
                for i in 0..3 {
                    for a in 0..3 {
                        cubic += u[i][a][x] * b[i][a][x];
                    }
                }
            }
            quad - cubic / 6.0
        });
        ScalarField::from_raw(grid, dealias_data(&grid, &raw))
    }
}

fn state_for(input: &RecursionInput<'_>) -> Result<RecursionState> {
    let mut st = RecursionState::new(input.omega0);
    for c in input.coeffs {
        st.push(c)?;
    }
    Ok(st)
}

/// Curl of `xi^(s)` from the lower coefficients.
pub fn curl_rhs(input: &RecursionInput<'_>) -> Result<VectorField> {
    Ok(state_for(input)?.curl_rhs())
}

/// Divergence of `xi^(s)` from the lower coefficients.
pub fn div_rhs(input: &RecursionInput<'_>) -> Result<ScalarField> {
    Ok(state_for(input)?.div_rhs())
}

/// Sup over nodes of `|sum_k grad Xdot_k x grad X_k - omega0|` for the
/// truncated series at time `t`.
pub fn cauchy_residual(series: &TaylorSeries, omega0: &VectorField, t: f64) -> Result<f64> {
    let grid = *series.grid();
    grid.check_same(omega0.grid())?;
    let gx = jacobian(&series.displacement(t));
    let gv = jacobian(&series.velocity(t));
    let (gx, gv) = (&gx.entries, &gv.entries);
    Ok(par::max_over(grid.len(), |x| {
        let mut r2 = 0.0;
        for c in 0..3 {
            let (p, q) = ((c + 1) % 3, (c + 2) % 3);
            let mut acc = 0.0;
            for k in 0..3 {
                let xp = gx[p][k][x] + f64::from(u8::from(p == k));
                let xq = gx[q][k][x] + f64::from(u8::from(q == k));
                acc += gv[p][k][x] * xq - gv[q][k][x] * xp;
            }
            let r = acc - omega0.comp(c)[x];
            r2 += r * r;
        }
        r2.sqrt()
    }))
}

/// Sup over nodes of `|det(grad X) - 1|` at time `t`.
pub fn jacobian_residual(series: &TaylorSeries, t: f64) -> f64 {
    let grid = *series.grid();
    let g = jacobian(&series.displacement(t));
    let e = &g.entries;
    par::max_over(grid.len(), |x| {
        let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|a| e[i][a][x]));
        det_identity_plus_minus_one(&m).abs()
    })
}

/// `det(I + G) - 1` expanded in the invariants of `G`, so small `G` does
/// not lose digits to cancellation against the identity.
pub(crate) fn det_identity_plus_minus_one(g: &[[f64; 3]; 3]) -> f64 {
    let trace = g[0][0] + g[1][1] + g[2][2];
    let minors = g[0][0] * g[1][1] - g[0][1] * g[1][0] + g[0][0] * g[2][2] - g[0][2] * g[2][0]
        + g[1][1] * g[2][2]
        - g[1][2] * g[2][1];
    trace + minors + det3(g)
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
