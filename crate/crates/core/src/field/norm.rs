//! Sampled Hölder norms `||f||_{m,gamma}` for `m` in {0, 1}.
//!
//! The seminorm is the largest difference quotient over node pairs closer
//! than four grid spacings, plus a fixed set of long-range pairs drawn from a
//! seeded generator, so repeated calls see the same pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::grad_components;
use super::{max_abs, LabelGrid, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::par;

const BALL_RADIUS: i64 = 4;
const LONG_RANGE_PAIRS: usize = 512;
const PAIR_SEED: u64 = 0x5eed_c0de;

/// The pair set used by the sampled seminorm.
#[derive(Debug, Clone)]
pub struct HolderPairs {
    grid: LabelGrid,
    offsets: Vec<[i64; 3]>,
    long_range: Vec<(usize, usize)>,
}

impl HolderPairs {
    pub fn new(grid: &LabelGrid) -> Self {
        let mut offsets = Vec::new();
        for dk in -BALL_RADIUS..=BALL_RADIUS {
            for dj in -BALL_RADIUS..=BALL_RADIUS {
                for di in -BALL_RADIUS..=BALL_RADIUS {
                    let r2 = di * di + dj * dj + dk * dk;
                    // one of each +/- pair
                    let positive = (dk, dj, di) > (0, 0, 0);
                    if r2 > 0 && r2 <= BALL_RADIUS * BALL_RADIUS && positive {
                        offsets.push([di, dj, dk]);
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SEED);
        let n = grid.len();
        let long_range = if n > 1 {
            (0..LONG_RANGE_PAIRS)
                .map(|_| {
                    let a = rng.gen_range(0..n);
                    let mut b = rng.gen_range(0..n);
                    while b == a {
                        b = rng.gen_range(0..n);
                    }
                    (a, b)
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            grid: *grid,
            offsets,
            long_range,
        }
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    /// Largest `|f(x) - f(y)| / |x - y|^gamma` over the pair set.
    pub fn seminorm(&self, data: &[f64], gamma: f64) -> f64 {
        let g = &self.grid;
        let dims = g.dims();
        let h = [g.spacing(0), g.spacing(1), g.spacing(2)];
        let periodic = [
            g.is_periodic_axis(0),
            g.is_periodic_axis(1),
            g.is_periodic_axis(2),
        ];
        let weights: Vec<f64> = self
            .offsets
            .iter()
            .map(|o| {
                let d2: f64 = (0..3).map(|a| (o[a] as f64 * h[a]).powi(2)).sum();
                d2.sqrt().powf(-gamma)
            })
            .collect();
        let local = par::max_over(g.len(), |idx| {
            let ijk = g.unravel(idx);
            let mut best = 0.0_f64;
            'offsets: for (o, w) in self.offsets.iter().zip(&weights) {
                let mut nb = [0usize; 3];
                for a in 0..3 {
                    let n = dims[a] as i64;
                    let v = ijk[a] as i64 + o[a];
                    nb[a] = if periodic[a] {
                        v.rem_euclid(n) as usize
                    } else if v < 0 || v >= n {
                        continue 'offsets;
                    } else {
                        v as usize
                    };
                }
                // tiny periodic axes wrap back onto the node itself
                let j = g.index(nb[0], nb[1], nb[2]);
                if j != idx {
                    best = best.max((data[idx] - data[j]).abs() * w);
                }
            }
            best
        });
        let far = self
            .long_range
            .iter()
            .map(|&(a, b)| {
                let d = distance(g, a, b);
                if d > 0.0 {
                    (data[a] - data[b]).abs() / d.powf(gamma)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        local.max(far)
    }
}

/// Euclidean distance between two nodes, minimum image on periodic axes.
pub(crate) fn distance(g: &LabelGrid, a: usize, b: usize) -> f64 {
    let pa = g.node(a);
    let pb = g.node(b);
    let l = g.lengths();
    (0..3)
        .map(|ax| {
            let mut d = (pa[ax] - pb[ax]).abs();
            if g.is_periodic_axis(ax) {
                d = d.min(l[ax] - d);
            }
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn check_params(m: usize, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!(
            "Hölder exponent must lie in (0, 1), got {gamma}"
        )));
    }
    if m > 1 {
        return Err(Error::InvalidInput(format!(
            "Hölder norms are implemented for m <= 1, got {m}"
        )));
    }
    Ok(())
}

fn scalar_norm(pairs: &HolderPairs, data: &[f64], m: usize, gamma: f64) -> f64 {
    let mut fields = vec![data.to_vec()];
    if m == 1 {
        fields.extend(grad_components(pairs.grid(), data));
    }
    let sup = fields.iter().map(|f| max_abs(f)).fold(0.0, f64::max);
    let semi = fields
        .iter()
        .map(|f| pairs.seminorm(f, gamma))
        .fold(0.0, f64::max);
    sup + semi
}

/// `||f||_{m,gamma}`, with the pair set supplied by the caller so repeated
/// norms on one grid share it.
pub fn holder_norm(f: &ScalarField, m: usize, gamma: f64, pairs: &HolderPairs) -> Result<f64> {
    check_params(m, gamma)?;
    f.grid().check_same(pairs.grid())?;
    Ok(scalar_norm(pairs, f.data(), m, gamma))
}

/// Largest component norm of a vector field.
pub fn holder_norm_vector(
    u: &VectorField,
    m: usize,
    gamma: f64,
    pairs: &HolderPairs,
) -> Result<f64> {
    check_params(m, gamma)?;
    u.grid().check_same(pairs.grid())?;
    Ok((0..3)
        .map(|c| scalar_norm(pairs, u.comp(c), m, gamma))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_no_seminorm() {
        let g = LabelGrid::periodic([8, 8, 8], [1.0; 3]).unwrap();
        let pairs = HolderPairs::new(&g);
        let f = ScalarField::from_fn(g, |_| -2.5);
        assert_eq!(pairs.seminorm(f.data(), 0.5), 0.0);
        assert_eq!(holder_norm(&f, 0, 0.5, &pairs).unwrap(), 2.5);
    }

    #[test]
    fn linear_profile_across_channel() {
        // |z - z'|^{1/2} peaks at the full channel width
        let g = LabelGrid::channel([4, 4, 33], [1.0, 1.0, 1.0]).unwrap();
        let pairs = HolderPairs::new(&g);
        let f = ScalarField::from_fn(g, |p| p[2]);
        let semi = pairs.seminorm(f.data(), 0.5);
        assert!((semi - 1.0).abs() < 0.05, "{semi}");
    }

    #[test]
    fn sampled_seminorm_tracks_all_pairs() {
        let g = LabelGrid::periodic([16, 16, 16], [1.0; 3]).unwrap();
        let pairs = HolderPairs::new(&g);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let sampled = pairs.seminorm(f.data(), 0.5);
        let n = g.len();
        let exact = par::max_over(n, |a| {
            let mut best = 0.0_f64;
            for b in 0..n {
                if a != b {
                    let d = distance(&g, a, b);
                    best = best.max((f.data()[a] - f.data()[b]).abs() / d.sqrt());
                }
            }
            best
        });
        assert!(sampled <= exact * (1.0 + 1e-12));
        assert!(sampled >= 0.95 * exact, "sampled {sampled} exact {exact}");
    }

    #[test]
    fn subadditive_on_shared_pairs() {
        let g = LabelGrid::periodic([8, 8, 8], [1.0; 3]).unwrap();
        let pairs = HolderPairs::new(&g);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * p[1].cos());
        let h = ScalarField::from_fn(g, |p| (2.0 * PI * (p[2] - p[1])).cos());
        let sum = ScalarField::from_fn(g, |p| {
            (2.0 * PI * p[0]).sin() * p[1].cos() + (2.0 * PI * (p[2] - p[1])).cos()
        });
        for m in [0, 1] {
            let lhs = holder_norm(&sum, m, 0.3, &pairs).unwrap();
            let rhs =
                holder_norm(&f, m, 0.3, &pairs).unwrap() + holder_norm(&h, m, 0.3, &pairs).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        let g = LabelGrid::periodic([4, 4, 4], [1.0; 3]).unwrap();
        let pairs = HolderPairs::new(&g);
        let f = ScalarField::zeros(g);
        assert!(holder_norm(&f, 0, 1.0, &pairs).is_err());
        assert!(holder_norm(&f, 2, 0.5, &pairs).is_err());
    }
}
