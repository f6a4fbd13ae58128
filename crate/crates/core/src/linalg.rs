//! Banded LU factorization with partial pivoting for the per-mode 1D solves.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factors of a square matrix with `lower` sub- and `upper`
/// super-diagonals.  Storage is dense; elimination loops stay inside the
/// band, so the cost is `O(n * lower * (lower + upper))`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    reach: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors the row-major `n x n` matrix `a`.  Pass `lower = upper = n`
    /// for a dense matrix.
    pub fn factor(n: usize, mut a: Vec<f64>, lower: usize, upper: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let lower = lower.min(n.saturating_sub(1));
        // row swaps can push fill-in up to lower + upper above the diagonal
        let reach = (lower + upper).min(n.saturating_sub(1));
        let mut pivots = vec![0; n];
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let last = (col + lower).min(n - 1);
            let mut p = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..=last {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-14 * scale || best == 0.0 {
                return Err(Error::Numeric(format!(
                    "singular matrix at column {col} of {n}"
                )));
            }
            pivots[col] = p;
            if p != col {
                // multipliers left of `col` stay with their elimination step
                for c in col..n {
                    a.swap(col * n + c, p * n + c);
                }
            }
            let end = (col + reach).min(n - 1);
            let d = a[col * n + col];
            for r in col + 1..=last {
                let f = a[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                a[r * n + col] = f;
                for c in col + 1..=end {
                    a[r * n + c] -= f * a[col * n + c];
                }
            }
        }
        Ok(Self {
            n,
            lower,
            reach,
            lu: a,
            pivots,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                b.swap(col, p);
            }
            let last = (col + self.lower).min(n - 1);
            let bc = b[col];
            for r in col + 1..=last {
                b[r] -= self.lu[r * n + col] * bc;
            }
        }
        for row in (0..n).rev() {
            let end = (row + self.reach).min(n - 1);
            let mut acc = b[row];
            for c in row + 1..=end {
                acc -= self.lu[row * n + c] * b[c];
            }
            b[row] = acc / self.lu[row * n + row];
        }
    }

    pub fn solve_complex_in_place(&self, b: &mut [Complex64]) {
        let mut re: Vec<f64> = b.iter().map(|c| c.re).collect();
        let mut im: Vec<f64> = b.iter().map(|c| c.im).collect();
        self.solve_in_place(&mut re);
        self.solve_in_place(&mut im);
        for (v, (r, i)) in b.iter_mut().zip(re.into_iter().zip(im)) {
            *v = Complex64::new(r, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|r| (0..n).map(|c| a[r * n + c] * x[c]).sum())
            .collect()
    }

    #[test]
    fn solves_banded_system_needing_pivots() {
        let n = 9;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in r.saturating_sub(2)..(r + 3).min(n) {
                a[r * n + c] = ((r * 7 + c * 3) % 5) as f64 - 1.5;
            }
            a[r * n + r] = if r % 3 == 0 { 0.0 } else { 0.1 };
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let b = matvec(n, &a, &x);
        let lu = BandedLu::factor(n, a, 2, 2).unwrap();
        let mut y = b.clone();
        lu.solve_in_place(&mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(BandedLu::factor(2, a, 2, 2).is_err());
    }
}
