//! Faà di Bruno assembly of the wall-normal data for each Taylor coefficient.
//!
//! A flat wall is the zero set of a chart function `S`.  Expanding
//! `S(a + sum_l xi^(l) t^l)` in `t` gives, at order `s`,
//!
//! ```text
//! sum_{1 <= |beta| <= s} d^beta S(a)  sum_{P(s, beta)}  prod_j prod_c (xi_c^(l_j))^(k_jc) / k_jc!
//! ```
//!
//! where `P(s, beta)` collects the strictly increasing lengths
//! `l_1 < ... < l_i` and non-zero multi-indices `k_1..k_i` with
//! `sum_j k_j = beta` and `sum_j |k_j| l_j = s`.  The `|beta| = 1` part is
//! `grad S . xi^(s)`; every other part uses lower coefficients only.

use std::collections::HashMap;
use std::ops::RangeInclusive;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::field::{LabelGrid, TaylorSeries, VectorField, WallField};
use crate::par;

/// Largest order (and multi-index length) accepted by the enumerator.
pub const MAX_ORDER: usize = 16;

pub type MultiIndex = [usize; 3];

/// One element of `P(s, beta)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionTerm {
    pub lengths: Vec<usize>,
    pub ks: Vec<MultiIndex>,
}

impl PartitionTerm {
    /// `prod_j prod_c xi[l_j - 1][c]^k_jc / k_jc!`.
    pub fn evaluate(&self, xi: &[[f64; 3]]) -> f64 {
        let mut prod = 1.0;
        for (l, k) in self.lengths.iter().zip(&self.ks) {
            for c in 0..3 {
                if k[c] > 0 {
                    prod *= xi[l - 1][c].powi(k[c] as i32) / factorial(k[c]);
                }
            }
        }
        prod
    }

    /// Polynomial degree of the term in the coefficients.
    pub fn degree(&self) -> usize {
        self.ks.iter().map(order).sum()
    }
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|j| j as f64).product()
}

pub fn order(beta: &MultiIndex) -> usize {
    beta.iter().sum()
}

type Cache = RwLock<HashMap<(usize, MultiIndex), Arc<[PartitionTerm]>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// The set `P(s, beta)`, sorted by `(i, lengths, ks)`.  Empty when
/// `|beta| > s`.
pub fn partitions(s: usize, beta: MultiIndex) -> Result<Arc<[PartitionTerm]>> {
    if s == 0 || s > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "partition order must lie in 1..={MAX_ORDER}, got {s}"
        )));
    }
    if order(&beta) == 0 {
        return Err(Error::InvalidInput("multi-index must be non-zero".into()));
    }
    if let Some(hit) = cache()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .get(&(s, beta))
    {
        return Ok(Arc::clone(hit));
    }
    let mut terms = Vec::new();
    if order(&beta) <= s {
        let mut lengths = Vec::new();
        let mut ks = Vec::new();
        enumerate(1, beta, s, &mut lengths, &mut ks, &mut terms);
    }
    terms.sort_by(|a, b| {
        (a.lengths.len(), &a.lengths, &a.ks).cmp(&(b.lengths.len(), &b.lengths, &b.ks))
    });
    let terms: Arc<[PartitionTerm]> = terms.into();
    cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .entry((s, beta))
        .or_insert_with(|| Arc::clone(&terms));
    Ok(terms)
}

fn enumerate(
    min_len: usize,
    rest: MultiIndex,
    budget: usize,
    lengths: &mut Vec<usize>,
    ks: &mut Vec<MultiIndex>,
    out: &mut Vec<PartitionTerm>,
) {
    if order(&rest) == 0 {
        if budget == 0 {
            out.push(PartitionTerm {
                lengths: lengths.clone(),
                ks: ks.clone(),
            });
        }
        return;
    }
    // every remaining unit costs at least `min_len`
    if order(&rest) * min_len > budget {
        return;
    }
    for l in min_len..=budget {
        for k0 in 0..=rest[0] {
            for k1 in 0..=rest[1] {
                for k2 in 0..=rest[2] {
                    let k = [k0, k1, k2];
                    let size = order(&k);
                    if size == 0 || size * l > budget {
                        continue;
                    }
                    lengths.push(l);
                    ks.push(k);
                    enumerate(
                        l + 1,
                        [rest[0] - k0, rest[1] - k1, rest[2] - k2],
                        budget - size * l,
                        lengths,
                        ks,
                        out,
                    );
                    lengths.pop();
                    ks.pop();
                }
            }
        }
    }
}

/// All multi-indices with `|beta|` in `degrees`.
pub fn multi_indices(degrees: RangeInclusive<usize>) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in degrees {
        for b0 in (0..=d).rev() {
            for b1 in (0..=d - b0).rev() {
                out.push([b0, b1, d - b0 - b1]);
            }
        }
    }
    out
}

/// Order-`s` Taylor coefficient of `S(a + xi(t))`, restricted to the
/// multi-indices with `|beta|` in `degrees`.  `deriv(beta)` returns
/// `d^beta S(a)`; `xi[l - 1]` is `xi^(l)(a)` and must reach the largest
/// length the selected terms use.
pub fn composition_coefficient(
    s: usize,
    degrees: RangeInclusive<usize>,
    deriv: impl Fn(MultiIndex) -> f64,
    xi: &[[f64; 3]],
) -> Result<f64> {
    let lo = (*degrees.start()).max(1);
    let hi = (*degrees.end()).min(s);
    if lo > hi {
        return Ok(0.0);
    }
    if xi.len() + lo < s + 1 {
        return Err(Error::InvalidInput(format!(
            "order {s} from degree {lo} needs {} coefficients, got {}",
            s + 1 - lo,
            xi.len()
        )));
    }
    let mut total = 0.0;
    for beta in multi_indices(lo..=hi) {
        let d = deriv(beta);
        if d == 0.0 {
            continue;
        }
        let inner: f64 = partitions(s, beta)?.iter().map(|p| p.evaluate(xi)).sum();
        total += d * inner;
    }
    Ok(total)
}

/// A wall described as the zero set of `S`, with `grad S` non-vanishing on
/// it.
pub trait BoundaryChart: Sync {
    fn grid(&self) -> &LabelGrid;

    /// `S(p)`.
    fn eval(&self, p: [f64; 3]) -> f64;

    /// `d^beta S(p)`.
    fn derivative(&self, p: [f64; 3], beta: MultiIndex) -> f64;

    /// Highest derivative order available, or `None` when every order is
    /// known in closed form.
    fn max_deriv_order(&self) -> Option<usize>;

    fn wall_nodes(&self) -> Vec<usize> {
        self.grid().wall_nodes()
    }

    /// `grad S / |grad S|`.
    fn normal(&self, p: [f64; 3]) -> [f64; 3] {
        let g = [
            self.derivative(p, [1, 0, 0]),
            self.derivative(p, [0, 1, 0]),
            self.derivative(p, [0, 0, 1]),
        ];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        g.map(|v| v / n)
    }
}

/// `S = scale * z (L_z - z)` for the channel walls.  The normal points
/// into the fluid on both walls.
#[derive(Debug, Clone, Copy)]
pub struct ChannelChart {
    grid: LabelGrid,
    scale: f64,
}

impl ChannelChart {
    pub fn new(grid: LabelGrid) -> Result<Self> {
        Self::with_scale(grid, 1.0)
    }

    pub fn with_scale(grid: LabelGrid, scale: f64) -> Result<Self> {
        if grid.wall_nodes().is_empty() {
            return Err(Error::InvalidInput(
                "the channel chart needs a channel grid".into(),
            ));
        }
        if !(scale != 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "chart scale must be finite and non-zero, got {scale}"
            )));
        }
        Ok(Self { grid, scale })
    }
}

impl BoundaryChart for ChannelChart {
    fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    fn eval(&self, p: [f64; 3]) -> f64 {
        self.scale * p[2] * (self.grid.lengths()[2] - p[2])
    }

    fn derivative(&self, p: [f64; 3], beta: MultiIndex) -> f64 {
        if beta[0] != 0 || beta[1] != 0 {
            return 0.0;
        }
        match beta[2] {
            0 => self.eval(p),
            1 => self.scale * (self.grid.lengths()[2] - 2.0 * p[2]),
            2 => -2.0 * self.scale,
            _ => 0.0,
        }
    }

    fn max_deriv_order(&self) -> Option<usize> {
        None
    }
}

/// Wall-normal datum `xi^(s) . nu` implied by the wall staying invariant,
/// from `coeffs = xi^(1)..xi^(s-1)`.
pub fn boundary_normal_rhs(
    s: usize,
    coeffs: &[VectorField],
    chart: &dyn BoundaryChart,
) -> Result<WallField> {
    let grid = *chart.grid();
    if s == 0 || s > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "order must lie in 1..={MAX_ORDER}, got {s}"
        )));
    }
    if coeffs.len() != s - 1 {
        return Err(Error::InvalidInput(format!(
            "order {s} needs {} coefficients, got {}",
            s - 1,
            coeffs.len()
        )));
    }
    for c in coeffs {
        grid.check_same(c.grid())?;
    }
    if let Some(limit) = chart.max_deriv_order() {
        if limit < s {
            return Err(Error::InvalidInput(format!(
                "chart provides derivatives up to order {limit}, order {s} needs {s}"
            )));
        }
    }
    let nodes = chart.wall_nodes();
    if s == 1 {
        return WallField::new(grid, vec![0.0; nodes.len()]);
    }
    // warm the cache so the parallel loop only reads it
    for beta in multi_indices(2..=s) {
        partitions(s, beta)?;
    }
    let vals = par::map_indices(nodes.len(), |w| -> Result<f64> {
        let idx = nodes[w];
        let p = grid.node(idx);
        let xi: Vec<[f64; 3]> = coeffs.iter().map(|c| c.at(idx)).collect();
        let rhs = composition_coefficient(s, 2..=s, |b| chart.derivative(p, b), &xi)?;
        let g = [
            chart.derivative(p, [1, 0, 0]),
            chart.derivative(p, [0, 1, 0]),
            chart.derivative(p, [0, 0, 1]),
        ];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numeric(format!(
                "chart gradient vanishes at wall node {idx}"
            )));
        }
        Ok(-rhs / norm)
    });
    WallField::new(grid, vals.into_iter().collect::<Result<Vec<_>>>()?)
}

/// `max |S(a + xi(t, a))|` over the wall nodes.
pub fn boundary_residual(series: &TaylorSeries, chart: &dyn BoundaryChart, t: f64) -> f64 {
    let grid = *series.grid();
    let nodes = chart.wall_nodes();
    if nodes.is_empty() {
        return 0.0;
    }
    let d = series.displacement(t);
    par::max_over(nodes.len(), |w| {
        let idx = nodes[w];
        let a = grid.node(idx);
        let x = d.at(idx);
        chart.eval([a[0] + x[0], a[1] + x[1], a[2] + x[2]]).abs()
    })
}
