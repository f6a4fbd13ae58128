//! Ultradifferentiable weight sequences and the convergence-radius calculator.
//!
//! A [`WeightSequence`] stores the normalized weights `M_k`; the full class
//! weights are `k! * M_k` and are never stored.  The module checks the three
//! structural properties of the log-superlinear Faà di Bruno class, classifies
//! quasi-analyticity with the Denjoy–Carleman criterion, and evaluates the
//! cubic majorant that bounds the radius of convergence of the Lagrangian
//! time-Taylor series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when comparing products of weights.
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    Analytic,
    Gevrey { r: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    kind: WeightKind,
    values: Vec<f64>,
}

impl WeightSequence {
    /// Builds `M_0..=M_kmax` for an analytic or Gevrey class.
    pub fn new(kind: WeightKind, kmax: usize) -> Result<Self> {
        if kmax < 2 {
            return Err(Error::InvalidInput(format!(
                "kmax must be at least 2, got {kmax}"
            )));
        }
        let values = match kind {
            WeightKind::Analytic => vec![1.0; kmax + 1],
            WeightKind::Gevrey { r } => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "Gevrey order must be positive, got {r}"
                    )));
                }
                let values: Vec<f64> = (0..=kmax).map(|k| (ln_factorial(k) * r).exp()).collect();
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "Gevrey weights of order {r} overflow before kmax = {kmax}"
                    )));
                }
                values
            }
            WeightKind::Custom => {
                return Err(Error::InvalidInput(
                    "custom weights must be built with WeightSequence::custom".into(),
                ))
            }
        };
        Ok(Self { kind, values })
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput(
                "custom weights need at least M_0..M_2".into(),
            ));
        }
        if let Some(bad) = values.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weights must be positive, got {bad}"
            )));
        }
        Ok(Self {
            kind: WeightKind::Custom,
            values,
        })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn kmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `M_k`; panics past `kmax`.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub diff_stable: bool,
    pub c_d: f64,
    pub log_superlinear: bool,
    pub fdb_stable: bool,
    pub c_fdb: f64,
    pub tested_up_to: usize,
}

/// Checks differentiation stability, log-superlinearity and Faà di Bruno
/// stability over every index combination that fits in the stored prefix.
pub fn check_class_properties(w: &WeightSequence) -> ClassReport {
    let m = w.values();
    let kmax = w.kmax();

    // C_d: M_1 <= C_d M_0 is scored as k = 1, then (M_{k+1}/M_k)^{1/k}.
    let mut rates = Vec::with_capacity(kmax);
    rates.push(m[1] / m[0]);
    for k in 1..kmax {
        rates.push((m[k + 1] / m[k]).powf(1.0 / k as f64));
    }
    let c_d = rates.iter().cloned().fold(f64::MIN, f64::max);
    // A finite prefix always admits some constant; flag growth that is still
    // accelerating over the last third of the prefix as unstable.
    let tail = &rates[(2 * rates.len()) / 3..];
    let accelerating = tail.len() >= 2 && tail.windows(2).all(|p| p[1] > p[0] * (1.0 + 1e-9));
    let diff_stable = c_d.is_finite() && c_d > 0.0 && !accelerating;

    let mut log_superlinear = true;
    'outer: for k in 0..=kmax {
        for l in 0..=(kmax - k) {
            if m[k] * m[l] > m[0] * m[k + l] * (1.0 + REL_TOL) {
                log_superlinear = false;
                break 'outer;
            }
        }
    }

    // The product M_l * prod M_{alpha_i} is symmetric in alpha, so integer
    // partitions cover every composition.
    let mut c_fdb: f64 = 0.0;
    for k in 1..=kmax {
        let mut parts = Vec::with_capacity(k);
        for_each_partition(k, k, &mut parts, &mut |alpha| {
            let l = alpha.len();
            let prod: f64 = alpha.iter().map(|&a| m[a]).product::<f64>() * m[l];
            let ratio = (prod / m[k]).powf(1.0 / k as f64);
            c_fdb = c_fdb.max(ratio);
        });
    }
    let fdb_stable = c_fdb > 0.0 && c_fdb <= 1.0 + REL_TOL;

    ClassReport {
        diff_stable,
        c_d,
        log_superlinear,
        fdb_stable,
        c_fdb,
        tested_up_to: kmax,
    }
}

fn for_each_partition(
    n: usize,
    max_part: usize,
    parts: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if n == 0 {
        f(parts);
        return;
    }
    for p in (1..=max_part.min(n)).rev() {
        parts.push(p);
        for_each_partition(n - p, p, parts, f);
        parts.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuasiAnalyticity {
    QuasiAnalytic,
    NonQuasiAnalytic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenjoyCarleman {
    pub partial_sum: f64,
    pub verdict: QuasiAnalyticity,
}

/// Denjoy–Carleman classification: the class is non-quasi-analytic iff
/// `sum M_k / M_{k+1}` converges.
pub fn denjoy_carleman(w: &WeightSequence) -> Result<DenjoyCarleman> {
    if w.kmax() < 8 {
        return Err(Error::InvalidInput(format!(
            "Denjoy-Carleman test needs kmax >= 8, got {}",
            w.kmax()
        )));
    }
    let m = w.values();
    let partial_sum = (0..w.kmax()).map(|k| m[k] / m[k + 1]).sum();
    let verdict = match w.kind() {
        WeightKind::Analytic => QuasiAnalyticity::QuasiAnalytic,
        // ratio (k+1)^{-r}: a p-series
        WeightKind::Gevrey { r } if r > 1.0 => QuasiAnalyticity::NonQuasiAnalytic,
        WeightKind::Gevrey { .. } => QuasiAnalyticity::QuasiAnalytic,
        WeightKind::Custom => QuasiAnalyticity::Inconclusive,
    };
    Ok(DenjoyCarleman {
        partial_sum,
        verdict,
    })
}

/// `sum_{s=1..S} norms[s-1] * t^s / M_s`.
pub fn generating_function(norms: &[f64], w: &WeightSequence, t: f64) -> f64 {
    norms
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let s = i + 1;
            n / w.get(s) * t.powi(s as i32)
        })
        .sum()
}

/// User-supplied constants of the a-priori estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    pub c_a: f64,
    pub m0: f64,
    pub m1: f64,
    pub c_dn: f64,
    pub c_das: f64,
    pub c_sad: f64,
    pub omega0_norm: f64,
}

impl EstimateConstants {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("c_a", self.c_a),
            ("m0", self.m0),
            ("m1", self.m1),
            ("c_dn", self.c_dn),
            ("c_das", self.c_das),
            ("c_sad", self.c_sad),
            ("omega0_norm", self.omega0_norm),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "estimate constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The cubic majorant `Q(zeta) = a zeta^3 + b zeta^2 - zeta / C_DN + Gamma`.
#[derive(Debug, Clone, Copy)]
pub struct MajorantCubic {
    a: f64,
    b: f64,
    c: f64,
}

impl MajorantCubic {
    pub fn new(k: &EstimateConstants) -> Self {
        let u = k.c_a * k.m0;
        Self {
            a: 6.0 * u * u,
            b: 7.5 * u,
            c: -1.0 / k.c_dn,
        }
    }

    pub fn eval(&self, zeta: f64, gamma: f64) -> f64 {
        ((self.a * zeta + self.b) * zeta + self.c) * zeta + gamma
    }

    fn eval_scale(&self, zeta: f64, gamma: f64) -> f64 {
        (self.a * zeta.powi(3)).abs()
            + (self.b * zeta * zeta).abs()
            + (self.c * zeta).abs()
            + gamma.abs()
    }

    /// Positive critical point of `Q`, where the two positive roots collide.
    pub fn local_min(&self) -> f64 {
        let (a, b, c) = (3.0 * self.a, 2.0 * self.b, self.c);
        let disc = (b * b - 4.0 * a * c).sqrt();
        // c < 0, so the positive root is (-b + disc) / 2a; use the stable form.
        -2.0 * c / (b + disc)
    }

    /// Discriminant `-4p^3 - 27q^2` of the depressed cubic (positive when
    /// three distinct real roots exist).
    pub fn discriminant(&self, gamma: f64) -> f64 {
        let (p, q) = self.depressed(gamma);
        -4.0 * p * p * p - 27.0 * q * q
    }

    fn depressed(&self, gamma: f64) -> (f64, f64) {
        let (a, b, c, d) = (self.a, self.b, self.c, gamma);
        let p = (3.0 * a * c - b * b) / (3.0 * a * a);
        let q = (2.0 * b * b * b - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a * a * a);
        (p, q)
    }

    /// Smaller positive root `zeta_2(Gamma)`, for `0 <= Gamma <= Gamma_c`.
    pub fn intermediate_root(&self, gamma: f64) -> Result<f64> {
        if gamma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "Gamma must be non-negative, got {gamma}"
            )));
        }
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let hi = self.local_min();
        if self.eval(hi, gamma) > 0.0 {
            return Err(Error::Numeric(format!(
                "Gamma = {gamma} is past the root collision; no intermediate root"
            )));
        }
        // Cardano (trigonometric form) when the roots are well separated.
        let (p, q) = self.depressed(gamma);
        let shift = -self.b / (3.0 * self.a);
        let mut candidate = None;
        if p < 0.0 && self.discriminant(gamma) > 1e-12 * (4.0 * p.abs().powi(3)) {
            let r = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            let mut roots: Vec<f64> = (0..3)
                .map(|j| r * (phi - 2.0 * std::f64::consts::PI * j as f64 / 3.0).cos() + shift)
                .filter(|z| *z > 0.0)
                .collect();
            roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
            if let Some(&z) = roots.first() {
                if z <= hi {
                    candidate = Some(self.polish(z, gamma, 0.0, hi));
                }
            }
        }
        let root = match candidate {
            Some(z) if self.eval(z, gamma).abs() <= 1e-12 * self.eval_scale(z, gamma) => z,
            _ => self.bisect_root(gamma, 0.0, hi),
        };
        Ok(root)
    }

    fn polish(&self, mut z: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
        for _ in 0..4 {
            let f = self.eval(z, gamma);
            let df = (3.0 * self.a * z + 2.0 * self.b) * z + self.c;
            if df == 0.0 {
                break;
            }
            let next = z - f / df;
            if !(next >= lo && next <= hi) {
                break;
            }
            z = next;
        }
        z
    }

    /// Q is positive at 0 and non-positive at the local minimum.
    fn bisect_root(&self, gamma: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid, gamma) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Critical `Gamma_c` where the discriminant vanishes, by bracketed
    /// bisection to `1e-12` absolute.
    pub fn critical_gamma(&self) -> Result<f64> {
        if !(self.discriminant(0.0) > 0.0) {
            return Err(Error::Numeric(
                "cubic majorant has no positive critical Gamma (discriminant <= 0 at Gamma = 0)"
                    .into(),
            ));
        }
        let mut hi = 1e-6_f64;
        let mut steps = 0;
        while self.discriminant(hi) > 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Err(Error::Numeric(
                    "failed to bracket the critical Gamma".into(),
                ));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.discriminant(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub gamma_c: f64,
    pub zeta2_at_gamma_c: f64,
    pub t_c: f64,
    pub t_sad: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

/// Upper bound `T = min(t_Sad, t_c)` on the radius of convergence of the
/// generating function.
pub fn radius_from_cubic(k: &EstimateConstants) -> Result<RadiusReport> {
    k.validate()?;
    let q = MajorantCubic::new(k);
    let gamma_c = q.critical_gamma()?;
    if !(gamma_c > 0.0) {
        return Err(Error::Numeric("critical Gamma is not positive".into()));
    }
    let zeta2_at_gamma_c = q.intermediate_root(gamma_c)?;
    let time_per_gamma = k.m1 / k.omega0_norm;
    let t_c = gamma_c * time_per_gamma;
    // zeta_2 reaches C_Sad when Gamma = -Q(C_Sad)|_{Gamma=0}; beyond the
    // collision point zeta_2 never reaches it and t_c governs.
    let gamma_sad = -q.eval(k.c_sad.min(q.local_min()), 0.0);
    let t_sad = gamma_sad.min(gamma_c) * time_per_gamma;
    Ok(RadiusReport {
        gamma_c,
        zeta2_at_gamma_c,
        t_c,
        t_sad,
        t: t_sad.min(t_c),
    })
}
