//! Fourth-order finite differences and not-a-knot cubic splines on the
//! uniform wall-normal grid.

use crate::error::Result;
use crate::linalg::BandedLu;

/// One row of a difference operator: weights applied to consecutive nodes
/// starting at `start`, for unit spacing.
#[derive(Debug, Clone)]
pub struct StencilRow {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Fornberg's recursion for derivative weights of order `m` at `x0` on the
/// nodes `xs`.
fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![vec![0.0; n]; n]; m + 1];
    c[0][0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i][i] =
                        c1 * (k as f64 * c[k - 1][i - 1][i - 1] - c5 * c[k][i - 1][i - 1]) / c2;
                }
                c[0][i][i] = -c1 * c5 * c[0][i - 1][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][i][j] = (c4 * c[k][i - 1][j] - k as f64 * c[k - 1][i - 1][j]) / c3;
            }
            c[0][i][j] = c4 * c[0][i - 1][j] / c3;
        }
        c1 = c2;
    }
    (0..n).map(|j| c[m][n - 1][j]).collect()
}

fn stencil_rows(n: usize, order: usize, edge_width: usize) -> Vec<StencilRow> {
    // Centered 5-point in the interior; `edge_width`-point one-sided near
    // the ends (exact for polynomials up to the stencil degree).
    (0..n)
        .map(|k| {
            let start = if k >= 2 && k + 2 < n {
                k - 2
            } else if k < 2 {
                0
            } else {
                n - edge_width
            };
            let width = if k >= 2 && k + 2 < n { 5 } else { edge_width };
            let xs: Vec<f64> = (start..start + width).map(|j| j as f64).collect();
            StencilRow {
                start,
                weights: fornberg(k as f64, &xs, order),
            }
        })
        .collect()
}

/// Fourth-order first derivative on `n >= 5` uniform nodes (unit spacing).
pub fn first_derivative_weights(n: usize) -> Vec<StencilRow> {
    stencil_rows(n, 1, 5)
}

/// Fourth-order second derivative on `n >= 6` uniform nodes (unit spacing).
pub fn second_derivative_weights(n: usize) -> Vec<StencilRow> {
    stencil_rows(n, 2, 6)
}

/// Not-a-knot cubic spline factorization for `n` uniform nodes.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    n: usize,
    h: f64,
    lu: BandedLu,
}

impl CubicSpline {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        assert!(n >= 4, "not-a-knot spline needs at least 4 nodes");
        let mut a = vec![0.0; n * n];
        // third-derivative continuity at nodes 1 and n-2
        a[0] = 1.0;
        a[1] = -2.0;
        a[2] = 1.0;
        for i in 1..n - 1 {
            a[i * n + i - 1] = 1.0;
            a[i * n + i] = 4.0;
            a[i * n + i + 1] = 1.0;
        }
        let r = (n - 1) * n;
        a[r + n - 3] = 1.0;
        a[r + n - 2] = -2.0;
        a[r + n - 1] = 1.0;
        let lu = BandedLu::factor(n, a, 2, 2)?;
        Ok(Self { n, h, lu })
    }

    /// Second derivatives at the nodes.
    pub fn moments(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n];
        let s = 6.0 / (self.h * self.h);
        for i in 1..n - 1 {
            m[i] = s * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
        }
        self.lu.solve_in_place(&mut m);
        m
    }

    /// Evaluates the spline with node values `y` and moments `m` at `z`
    /// (measured from the first node).
    pub fn eval(&self, y: &[f64], m: &[f64], z: f64) -> f64 {
        let (i, a, b) = self.locate(z);
        let h2 = self.h * self.h / 6.0;
        a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h2
    }

    /// Interval index and the two linear basis weights at `z`.
    pub fn locate(&self, z: f64) -> (usize, f64, f64) {
        let x = z / self.h;
        let i = (x.floor().max(0.0) as usize).min(self.n - 2);
        let b = x - i as f64;
        (i, 1.0 - b, b)
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }
}
