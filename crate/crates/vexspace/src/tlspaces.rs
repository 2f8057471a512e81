//! Triebel-Lizorkin norms on the grid and the checks built on them.
//!
//! Checks that assert stability take the same experiment at two resolutions
//! (`coarse` at N, `fine` at 2N) and compare the measured constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exponents::{check_standing_assumptions, ExponentField, Role};
use crate::lebesgue::{luxemburg_norm, mixed_norm, mixed_norm_tol, sequence_norm, DEFAULT_REL_TOL};
use crate::mollifiers::{drift, DRIFT_BUDGET};
use crate::phitransform::{analyze, bessel_potential, ladder, AdmissiblePair};
use crate::sampling::SampledField;
use crate::{Error, Result};

/// Budget on the measured `c_log(1/p)`, `c_log(1/q)` accepted by [`TLParams::new`].
pub const DEFAULT_CLOG_BUDGET: f64 = 20.0;
/// Largest `(α⁺+σ)·ν_max` allowed, keeping `2^{να}` well inside `f64`.
pub const SMOOTHNESS_BUDGET: f64 = 60.0;
pub const EQUIVALENCE_BUDGET: f64 = 8.0;
pub const LITTLEWOOD_PALEY_BUDGET: f64 = 16.0;
pub const LIFTING_BUDGET: f64 = 8.0;
pub const EMBEDDING_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TLParams {
    pub p: ExponentField,
    pub q: ExponentField,
    pub alpha: ExponentField,
    pub nu_max: u32,
    pub pair: AdmissiblePair,
}

impl TLParams {
    pub fn new(p: ExponentField, q: ExponentField, alpha: ExponentField, pair: AdmissiblePair) -> Result<Self> {
        Self::with_budget(p, q, alpha, pair, DEFAULT_CLOG_BUDGET)
    }

    pub fn with_budget(
        p: ExponentField,
        q: ExponentField,
        alpha: ExponentField,
        pair: AdmissiblePair,
        clog_budget: f64,
    ) -> Result<Self> {
        if p.grid != pair.grid || q.grid != pair.grid || alpha.grid != pair.grid {
            return Err(Error::GridMismatch);
        }
        let rep = check_standing_assumptions(&p, &q, &alpha, clog_budget);
        if !rep.pass {
            let failed: Vec<_> = rep.clauses.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
            return Err(Error::Precondition(format!("standing assumptions fail: {}", failed.join(", "))));
        }
        if alpha.max() * pair.nu_max as f64 > SMOOTHNESS_BUDGET {
            return Err(Error::Precondition("alpha⁺·nu_max exceeds the smoothness budget".into()));
        }
        Ok(Self { nu_max: pair.nu_max, p, q, alpha, pair })
    }

    /// Same exponents with another pair.
    pub fn with_pair(&self, pair: AdmissiblePair) -> Result<Self> {
        if pair.grid != self.pair.grid || pair.nu_max != self.nu_max {
            return Err(Error::InvalidParameter("pair must share grid and nu_max".into()));
        }
        Ok(Self { pair, ..self.clone() })
    }

    /// Hex SHA-256 over the grid, exponent samples and bounds, and the pair.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let g = self.pair.grid;
        h.update([g.dim() as u8, g.log2_n() as u8]);
        h.update(g.half_length().to_le_bytes());
        for e in [&self.p, &self.q, &self.alpha] {
            h.update(e.declared_lower.to_le_bytes());
            h.update(e.declared_upper.to_le_bytes());
            for s in &e.samples {
                h.update(s.to_le_bytes());
            }
        }
        h.update(self.pair.profile.id().as_bytes());
        h.update(self.nu_max.to_le_bytes());
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `‖f‖_F = ‖‖2^{να(x)} φ_ν∗f(x)‖_{l^{q(x)}}‖_{L^{p(·)}}`.
pub fn f_norm(f: &SampledField, params: &TLParams) -> Result<f64> {
    f_norm_tol(f, params, DEFAULT_REL_TOL)
}

pub fn f_norm_tol(f: &SampledField, params: &TLParams, rel_tol: f64) -> Result<f64> {
    mixed_norm_tol(&ladder(f, &params.pair)?, &params.p, &params.q, &params.alpha, rel_tol)
}

/// The norm plus a warning when `f` has spectral content beyond `2^{ν_max}`.
pub fn f_norm_checked(f: &SampledField, params: &TLParams) -> Result<(f64, Option<String>)> {
    let leak = f.out_of_band((params.nu_max as f64).exp2());
    let warning = (leak > 1e-10).then(|| format!("out-of-band spectral content {leak:e} relative to the peak"));
    Ok((f_norm(f, params)?, warning))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    pub params_digest: String,
    /// Ratios at the coarse resolution; `null` for vacuous (0/0) fields.
    pub per_field_ratios: Vec<Option<f64>>,
    #[serde(rename = "C_measured")]
    pub c_measured: f64,
    #[serde(rename = "C_refined", skip_serializing_if = "Option::is_none")]
    pub c_refined: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den == 0.0 && num == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

fn one_sided(r: &[Option<f64>]) -> f64 {
    r.iter().flatten().fold(0.0, |m, v| m.max(*v))
}

/// `max(max r, 1/min r)`, 1 when every field is vacuous.
fn two_sided(r: &[Option<f64>]) -> f64 {
    r.iter().flatten().fold(1.0, |m, v| m.max(*v).max(1.0 / v))
}

fn finish(
    check_id: &str,
    digest: String,
    coarse: Vec<Option<f64>>,
    c: f64,
    c_fine: f64,
    budget: Option<f64>,
    warnings: Vec<String>,
) -> CheckReport {
    let d = drift(&[c], &[c_fine]);
    let within = budget.map_or(true, |b| c <= b && c_fine <= b);
    let pass = c.is_finite() && c_fine.is_finite() && within && d <= DRIFT_BUDGET;
    CheckReport {
        check_id: check_id.into(),
        params_digest: digest,
        per_field_ratios: coarse,
        c_measured: c,
        c_refined: Some(c_fine),
        refinement_drift: Some(d),
        budget,
        pass,
        warnings,
    }
}

fn band_warnings(fields: &[SampledField], params: &TLParams) -> Vec<String> {
    let band = (params.nu_max as f64).exp2();
    fields
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let leak = f.out_of_band(band);
            (leak > 1e-10).then(|| format!("field {i}: out-of-band content {leak:e}"))
        })
        .collect()
}

/// `sequence_norm(S_φ f) / f_norm(f)` per field.
pub fn sphi_ratios(fields: &[SampledField], params: &TLParams) -> Result<Vec<Option<f64>>> {
    fields
        .par_iter()
        .map(|f| {
            let s = analyze(f, &params.pair)?;
            let num = sequence_norm(&s, &params.p, &params.q, &params.alpha)?;
            Ok(ratio(num, f_norm(f, params)?))
        })
        .collect()
}

pub fn check_sphi_bounded(
    coarse: (&[SampledField], &TLParams),
    fine: (&[SampledField], &TLParams),
) -> Result<CheckReport> {
    let rc = sphi_ratios(coarse.0, coarse.1)?;
    let rf = sphi_ratios(fine.0, fine.1)?;
    let (c, cf) = (one_sided(&rc), one_sided(&rf));
    Ok(finish("sphi-bounded", coarse.1.digest(), rc, c, cf, None, band_warnings(coarse.0, coarse.1)))
}

/// `f_norm_A / f_norm_B` per field.
pub fn equivalence_ratios(fields: &[SampledField], a: &TLParams, b: &TLParams) -> Result<Vec<Option<f64>>> {
    let same = a.p == b.p && a.q == b.q && a.alpha == b.alpha && a.nu_max == b.nu_max;
    if !same {
        return Err(Error::InvalidParameter("equivalence check needs identical exponents and nu_max".into()));
    }
    fields.par_iter().map(|f| Ok(ratio(f_norm(f, a)?, f_norm(f, b)?))).collect()
}

/// Arguments are `(fields, pair A params, pair B params)` at each resolution.
pub fn check_equivalence(
    coarse: (&[SampledField], &TLParams, &TLParams),
    fine: (&[SampledField], &TLParams, &TLParams),
) -> Result<CheckReport> {
    let rc = equivalence_ratios(coarse.0, coarse.1, coarse.2)?;
    let rf = equivalence_ratios(fine.0, fine.1, fine.2)?;
    let (c, cf) = (two_sided(&rc), two_sided(&rf));
    let digest = format!("{}+{}", coarse.1.digest(), coarse.2.pair.profile.id());
    Ok(finish("equivalence", digest, rc, c, cf, Some(EQUIVALENCE_BUDGET), band_warnings(coarse.0, coarse.1)))
}

/// `‖f‖_{p(·)} / ‖‖φ_ν∗f‖_{l²}‖_{p(·)}` per field.
pub fn littlewood_paley_ratios(fields: &[SampledField], p: &ExponentField, pair: &AdmissiblePair) -> Result<Vec<Option<f64>>> {
    if !(p.declared_lower > 1.0) || !p.declared_upper.is_finite() {
        return Err(Error::Precondition("Littlewood-Paley check needs 1 < p⁻ ≤ p⁺ < ∞".into()));
    }
    let g = pair.grid;
    let two = ExponentField::constant(g, 2.0, Role::SecondaryQ)?;
    let zero = ExponentField::constant(g, 0.0, Role::SmoothnessAlpha)?;
    fields
        .par_iter()
        .map(|f| {
            let num = luxemburg_norm(f, p, DEFAULT_REL_TOL)?;
            let den = mixed_norm(&ladder(f, pair)?, p, &two, &zero)?;
            Ok(ratio(num, den))
        })
        .collect()
}

pub fn check_littlewood_paley(
    coarse: (&[SampledField], &ExponentField, &AdmissiblePair),
    fine: (&[SampledField], &ExponentField, &AdmissiblePair),
) -> Result<CheckReport> {
    let rc = littlewood_paley_ratios(coarse.0, coarse.1, coarse.2)?;
    let rf = littlewood_paley_ratios(fine.0, fine.1, fine.2)?;
    let (c, cf) = (two_sided(&rc), two_sided(&rf));
    let mut h = Sha256::new();
    for s in &coarse.1.samples {
        h.update(s.to_le_bytes());
    }
    h.update(coarse.2.profile.id().as_bytes());
    Ok(finish("littlewood-paley", hex(&h.finalize()), rc, c, cf, Some(LITTLEWOOD_PALEY_BUDGET), vec![]))
}

/// `f_norm(B^σ f; α+σ) / f_norm(f; α)` per field.
pub fn lifting_ratios(fields: &[SampledField], params: &TLParams, sigma: f64) -> Result<Vec<Option<f64>>> {
    if !(0.0..=3.0).contains(&sigma) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} outside [0, 3]")));
    }
    if (params.alpha.max() + sigma) * params.nu_max as f64 > SMOOTHNESS_BUDGET {
        return Err(Error::Precondition("(alpha⁺+sigma)·nu_max exceeds the smoothness budget".into()));
    }
    let lifted = TLParams { alpha: params.alpha.shifted(sigma)?, ..params.clone() };
    fields
        .par_iter()
        .map(|f| Ok(ratio(f_norm(&bessel_potential(f, sigma), &lifted)?, f_norm(f, params)?)))
        .collect()
}

pub fn check_lifting(
    coarse: (&[SampledField], &TLParams),
    fine: (&[SampledField], &TLParams),
    sigma: f64,
) -> Result<CheckReport> {
    let rc = lifting_ratios(coarse.0, coarse.1, sigma)?;
    let rf = lifting_ratios(fine.0, fine.1, sigma)?;
    let (c, cf) = (two_sided(&rc), two_sided(&rf));
    let digest = format!("{}:sigma={sigma}", coarse.1.digest());
    Ok(finish("lifting", digest, rc, c, cf, Some(LIFTING_BUDGET), band_warnings(coarse.0, coarse.1)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub check_id: String,
    pub params_digest: String,
    /// `f_norm(f; params₁) / f_norm(f; params₀)`, at most `1 + 1e-10`.
    pub per_field_ratios: Vec<Option<f64>>,
    pub violations: usize,
    pub pass: bool,
}

const EMBEDDING_REL_TOL: f64 = 1e-12;

/// Equal-`p` embedding: `α₀ ≥ α₁`, `q₀ ≤ q₁` pointwise give `‖f‖_{F₁} ≤ ‖f‖_{F₀}`.
pub fn check_embedding(fields: &[SampledField], params0: &TLParams, params1: &TLParams) -> Result<EmbeddingReport> {
    if params0.p.samples != params1.p.samples {
        return Err(Error::Precondition("embedding check implements p₀ = p₁ only".into()));
    }
    if params0.pair != params1.pair {
        return Err(Error::Precondition("embedding check needs a shared pair".into()));
    }
    let a_ok = params0.alpha.samples.iter().zip(&params1.alpha.samples).all(|(a0, a1)| a0 >= a1);
    let q_ok = params0.q.samples.iter().zip(&params1.q.samples).all(|(q0, q1)| q0 <= q1);
    if !a_ok || !q_ok {
        return Err(Error::Precondition("need alpha₀ ≥ alpha₁ and q₀ ≤ q₁ pointwise".into()));
    }
    let ratios: Vec<Option<f64>> = fields
        .par_iter()
        .map(|f| {
            let n0 = f_norm_tol(f, params0, EMBEDDING_REL_TOL)?;
            let n1 = f_norm_tol(f, params1, EMBEDDING_REL_TOL)?;
            Ok(ratio(n1, n0))
        })
        .collect::<Result<_>>()?;
    let violations = ratios.iter().flatten().filter(|r| **r > 1.0 + EMBEDDING_TOL).count();
    Ok(EmbeddingReport {
        check_id: "embedding".into(),
        params_digest: format!("{}|{}", params0.digest(), params1.digest()),
        per_field_ratios: ratios,
        violations,
        pass: violations == 0,
    })
}
