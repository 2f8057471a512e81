//! Variable exponents `p(·)`, `q(·)`, `α(·)` with declared bounds and an
//! estimated local log-Hölder constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sampling::{Grid, SampledField};
use crate::{Error, Result};

/// Exhaustive scans are used whenever the number of distinct pairs is at most this.
pub const DEFAULT_MAX_PAIRS: usize = 1 << 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "primary-p")]
    PrimaryP,
    #[serde(rename = "secondary-q")]
    SecondaryQ,
    #[serde(rename = "smoothness-alpha")]
    SmoothnessAlpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentField {
    pub grid: Grid,
    pub samples: Vec<f64>,
    pub declared_lower: f64,
    pub declared_upper: f64,
    pub clog_local: f64,
    pub role: Role,
}

impl ExponentField {
    /// Validates bounds against the samples and estimates `c_log` with the default scan.
    pub fn new(grid: Grid, samples: Vec<f64>, lower: f64, upper: f64, role: Role) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidExponent(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidExponent("non-finite sample".into()));
        }
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidExponent(format!("bad bounds [{lower}, {upper}]")));
        }
        let (lo, hi) = min_max(&samples);
        let slack = 1e-12 * (1.0 + upper.abs().max(lower.abs()));
        if lo < lower - slack || hi > upper + slack {
            return Err(Error::InvalidExponent(format!(
                "samples in [{lo}, {hi}] exceed declared bounds [{lower}, {upper}]"
            )));
        }
        match role {
            Role::PrimaryP | Role::SecondaryQ if lower <= 0.0 => {
                return Err(Error::InvalidExponent(format!(
                    "integrability exponents need a positive lower bound, got {lower}"
                )))
            }
            _ => {}
        }
        let mut e = Self {
            grid,
            samples,
            declared_lower: lower,
            declared_upper: upper,
            clog_local: 0.0,
            role,
        };
        e.clog_local = estimate_clog_local(&e, DEFAULT_MAX_PAIRS, 0);
        Ok(e)
    }

    /// Like [`ExponentField::new`] but without sign checks on the role, used for
    /// diagnostics on invalid data.
    pub fn unchecked(grid: Grid, samples: Vec<f64>, role: Role) -> Self {
        let (lo, hi) = min_max(&samples);
        let mut e = Self { grid, samples, declared_lower: lo, declared_upper: hi, clog_local: 0.0, role };
        e.clog_local = estimate_clog_local(&e, DEFAULT_MAX_PAIRS, 0);
        e
    }

    pub fn constant(grid: Grid, value: f64, role: Role) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], value, value, role)
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64, lower: f64, upper: f64, role: Role) -> Result<Self> {
        let samples = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::new(grid, samples, lower, upper, role)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn min(&self) -> f64 {
        min_max(&self.samples).0
    }

    pub fn max(&self) -> f64 {
        min_max(&self.samples).1
    }

    pub fn is_constant(&self) -> bool {
        self.samples.iter().all(|&v| v == self.samples[0])
    }

    pub fn as_field(&self) -> SampledField {
        SampledField::from_real(self.grid, &self.samples).expect("length checked")
    }

    /// Pointwise `1/g` with reciprocal bounds.
    pub fn reciprocal(&self) -> Result<Self> {
        if self.declared_lower <= 0.0 {
            return Err(Error::InvalidExponent("reciprocal of a non-positive exponent".into()));
        }
        let s = self.samples.iter().map(|v| 1.0 / v).collect();
        Self::new(self.grid, s, 1.0 / self.declared_upper, 1.0 / self.declared_lower, self.role)
    }

    /// Pointwise `g + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let s = self.samples.iter().map(|v| v + c).collect();
        Self::new(self.grid, s, self.declared_lower + c, self.declared_upper + c, self.role)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn pair_value(g: &ExponentField, i: usize, j: usize) -> f64 {
    let grid = &g.grid;
    let d = grid.distance(grid.coords(i), grid.coords(j));
    if d < grid.spacing() * (1.0 - 1e-9) {
        return 0.0;
    }
    (g.samples[i] - g.samples[j]).abs() * (std::f64::consts::E + 1.0 / d).ln()
}

/// Lower estimate of the local log-Hölder constant
/// `max |g(x)−g(y)|·log(e + 1/|x−y|)` over pairs with `|x−y| ≥ h`.
///
/// All pairs are scanned when there are at most `max_pairs` of them.
/// Otherwise every pair within a small index window is scanned and
/// `max_pairs` further pairs are drawn from a ChaCha stream seeded by `seed`.
pub fn estimate_clog_local(g: &ExponentField, max_pairs: usize, seed: u64) -> f64 {
    if g.samples.iter().all(|&v| v == g.samples[0]) {
        return 0.0;
    }
    let n = g.samples.len();
    let total = n * (n - 1) / 2;
    if total <= max_pairs.max(1) {
        return (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).fold(0.0f64, |m, j| m.max(pair_value(g, i, j))))
            .reduce(|| 0.0, f64::max);
    }
    let grid = g.grid;
    let w: i64 = if grid.dim() == 1 { 8 } else { 2 };
    let np = grid.n() as i64;
    let local = (0..n)
        .into_par_iter()
        .map(|i| {
            let mi = grid.multi_index(i);
            let mut m = 0.0f64;
            let w1 = if grid.dim() == 1 { 0 } else { w };
            for d0 in -w..=w {
                for d1 in -w1..=w1 {
                    if d0 == 0 && d1 == 0 {
                        continue;
                    }
                    let j0 = (mi[0] as i64 + d0).rem_euclid(np) as usize;
                    let j1 = (mi[1] as i64 + d1).rem_euclid(np) as usize;
                    m = m.max(pair_value(g, i, grid.flat_index([j0, j1])));
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..max_pairs.max(1))
        .map(|_| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect();
    let far = pairs.par_iter().map(|&(i, j)| pair_value(g, i, j)).reduce(|| 0.0, f64::max);
    local.max(far)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandingReport {
    pub clauses: Vec<Clause>,
    pub pass: bool,
}

/// Checks positivity/finiteness of the bounds, `α ≥ 0`, and `c_log(1/p), c_log(1/q) ≤ budget`.
/// The decay-at-infinity clause holds trivially on the torus and is reported as such.
pub fn check_standing_assumptions(
    p: &ExponentField,
    q: &ExponentField,
    alpha: &ExponentField,
    clog_budget: f64,
) -> StandingReport {
    let mut clauses = Vec::new();
    let mut push = |name: &str, pass: bool, measured: f64| {
        clauses.push(Clause { name: name.to_string(), pass, measured });
    };
    for (label, e) in [("p", p), ("q", q)] {
        let lo = e.min();
        let hi = e.max();
        push(&format!("{label} bounds positive and finite"), lo > 0.0 && hi.is_finite(), lo);
        let recip: Vec<f64> = e.samples.iter().map(|v| 1.0 / v).collect();
        let c = if lo > 0.0 {
            estimate_clog_local(&ExponentField::unchecked(e.grid, recip, e.role), DEFAULT_MAX_PAIRS, 0)
        } else {
            f64::INFINITY
        };
        push(&format!("c_log(1/{label}) within budget"), c <= clog_budget, c);
    }
    let amin = alpha.min();
    push("alpha nonnegative", amin >= 0.0, amin);
    push("alpha bounded", alpha.max().is_finite(), alpha.max());
    push("limit at infinity (periodic domain)", true, 0.0);
    let pass = clauses.iter().all(|c| c.pass);
    StandingReport { clauses, pass }
}

/// Decay order `M = 2(n + c_log(α)) / min{1, p⁻, q⁻}`.
pub fn molecule_decay_m(p: &ExponentField, q: &ExponentField, alpha: &ExponentField) -> f64 {
    let n = p.dim() as f64;
    let m = 1.0f64.min(p.declared_lower).min(q.declared_lower);
    2.0 * (n + alpha.clog_local) / m
}

/// Sidecar carried next to an exponent stored in the binary field format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSidecar {
    pub bounds: [f64; 2],
    pub role: Role,
}

impl ExponentField {
    pub fn sidecar(&self) -> ExponentSidecar {
        ExponentSidecar { bounds: [self.declared_lower, self.declared_upper], role: self.role }
    }

    pub fn from_parts(field: &SampledField, sidecar: &ExponentSidecar) -> Result<Self> {
        Self::new(field.grid, field.re(), sidecar.bounds[0], sidecar.bounds[1], sidecar.role)
    }
}
