//! Restriction from the 2D torus to the line `x₂ = 0` and the trace
//! coefficient pipeline.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exponents::{ExponentField, Role};
use crate::lebesgue::{inner_lq, luxemburg_abs, sequence_norm, DEFAULT_REL_TOL};
use crate::mollifiers::drift;
use crate::mollifiers::DRIFT_BUDGET;
use crate::phitransform::analyze;
use crate::sampling::{level_layout, CoeffSeq, DyadicCube, Grid, SampledField};
use crate::tlspaces::{f_norm, hex, CheckReport, TLParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSetup {
    pub source: Grid,
    pub target: Grid,
    /// Row index `i₂` of the line; always 0 (`x₂ = 0`).
    pub row: usize,
}

impl TraceSetup {
    pub fn new(source: Grid) -> Result<Self> {
        if source.dim() != 2 {
            return Err(Error::InvalidGrid("trace source must be 2D".into()));
        }
        let target = Grid::new(1, source.n(), source.half_length())?;
        Ok(Self { source, target, row: 0 })
    }
}

/// Values on the line `x₂ = 0`.
pub fn restrict(f: &SampledField, setup: &TraceSetup) -> Result<SampledField> {
    if f.grid != setup.source {
        return Err(Error::GridMismatch);
    }
    let n = setup.source.n();
    let values = (0..n).map(|i| f.values[setup.source.flat_index([i, setup.row])]).collect();
    SampledField::new(setup.target, values)
}

/// Level-`μ` squares `Q` with `J ⊂ closure(3Q)` for the interval `J = [jℓ, (j+1)ℓ] × {0}`,
/// distinct modulo the torus.
pub fn covering_squares(setup: &TraceSetup, mu: u32, j: i64) -> Result<Vec<DyadicCube>> {
    let c = level_layout(&setup.source, mu)?.cubes_per_axis as i64;
    let mut out = BTreeSet::new();
    // closure(3Q) = [(k−1)ℓ, (k+2)ℓ] per axis
    for k0 in j - 1..=j + 1 {
        if !(k0 - 1 <= j && j + 1 <= k0 + 2) {
            continue;
        }
        for k1 in -2i64..=1 {
            if k1 - 1 <= 0 && 0 <= k1 + 2 {
                out.insert(DyadicCube::new(mu, [k0.rem_euclid(c), k1.rem_euclid(c)]));
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceCoeffs {
    pub coeffs: CoeffSeq,
    /// Largest number of squares enumerated for a single `J`.
    pub max_count: usize,
}

/// `t_J = |Q|^{-1/(2n)} Σ_{Q: J ⊂ 3Q} |s_Q|` on the line (here `n = 2`, so the prefactor is `2^{μ/2}`).
pub fn trace_coeffs(s: &CoeffSeq, setup: &TraceSetup) -> Result<TraceCoeffs> {
    let mut coeffs = CoeffSeq::new(s.nu_max);
    let mut max_count = 0;
    for mu in 0..=s.nu_max {
        let c = level_layout(&setup.target, mu)?.cubes_per_axis as i64;
        let pre = (-(mu as f64) * 2.0).exp2().powf(-1.0 / 4.0);
        let rows: Vec<(i64, f64, usize)> = (0..c)
            .into_par_iter()
            .map(|j| -> Result<(i64, f64, usize)> {
                let sq = covering_squares(setup, mu, j)?;
                let sum: f64 = sq.iter().map(|q| s.get(q).norm()).sum();
                Ok((j, pre * sum, sq.len()))
            })
            .collect::<Result<_>>()?;
        for (j, v, n) in rows {
            max_count = max_count.max(n);
            coeffs.insert(DyadicCube::new(mu, [j, 0]), Complex64::new(v, 0.0));
        }
    }
    Ok(TraceCoeffs { coeffs, max_count })
}

/// Axis-aligned box `x_Q + ℓ(Q)·[offset, offset+extent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EBox {
    pub offset: [f64; 2],
    pub extent: [f64; 2],
}

impl EBox {
    pub const WHOLE: EBox = EBox { offset: [0.0, 0.0], extent: [1.0, 1.0] };
    /// `¾ℓ ≤ x₂ ≤ ℓ` inside `Q`.
    pub const UPPER_QUARTER: EBox = EBox { offset: [0.0, 0.75], extent: [1.0, 0.25] };
}

pub const MIN_E_FRACTION: f64 = 0.25;

/// Grid points of the box for cube `q`, validated against `3Q` and the size floor.
fn box_points(grid: &Grid, q: &DyadicCube, b: &EBox) -> Result<Vec<usize>> {
    let dim = grid.dim();
    let side = q.side();
    let h = grid.spacing();
    let mut frac = 1.0;
    let mut ranges = [(0i64, 1i64); 2];
    for a in 0..dim {
        let (o, e) = (b.offset[a], b.extent[a]);
        if o < -1.0 - 1e-12 || o + e > 2.0 + 1e-12 || e <= 0.0 {
            return Err(Error::Precondition(format!("E_Q {b:?} leaves 3Q")));
        }
        frac *= e;
        let start = (q.k[a] as f64 + o) * side / h;
        let len = e * side / h;
        if (start - start.round()).abs() > 1e-9 || (len - len.round()).abs() > 1e-9 || len.round() < 1.0 {
            return Err(Error::Precondition(format!("E_Q {b:?} is not grid-resolvable at level {}", q.level)));
        }
        ranges[a] = (start.round() as i64, len.round() as i64);
    }
    if frac < MIN_E_FRACTION - 1e-12 {
        return Err(Error::Precondition(format!("|E_Q| = {frac}|Q| < |Q|/4")));
    }
    let n = grid.n() as i64;
    let mut out = Vec::new();
    for i in ranges[0].0..ranges[0].0 + ranges[0].1 {
        if dim == 1 {
            out.push(i.rem_euclid(n) as usize);
            continue;
        }
        for j in ranges[1].0..ranges[1].0 + ranges[1].1 {
            out.push(grid.flat_index([i.rem_euclid(n) as usize, j.rem_euclid(n) as usize]));
        }
    }
    Ok(out)
}

/// Sequence norm with `χ_Q` replaced by `χ_{E_Q}`.
pub fn shifted_sequence_norm(
    s: &CoeffSeq,
    e_map: &dyn Fn(&DyadicCube) -> EBox,
    p: &ExponentField,
    q: &ExponentField,
    alpha: &ExponentField,
) -> Result<f64> {
    let grid = p.grid;
    let dim = grid.dim();
    let mut levels = vec![vec![0.0; grid.len()]; s.nu_max as usize + 1];
    for (c, v) in &s.entries {
        let a = v.norm() / c.volume(dim).sqrt();
        let pts = box_points(&grid, c, &e_map(c))?;
        if a == 0.0 {
            continue;
        }
        for i in pts {
            levels[c.level as usize][i] += a;
        }
    }
    let g = inner_lq(&levels, &q.samples, &alpha.samples);
    luxemburg_abs(&g, &p.samples, p.declared_lower, p.declared_upper, grid.cell_volume(), DEFAULT_REL_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// `[standard / shifted, shifted / standard]` at the coarse resolution.
    pub constants: [f64; 2],
    pub constants_refined: [f64; 2],
    pub refinement_drift: f64,
    pub pass: bool,
}

type Exps<'a> = (&'a ExponentField, &'a ExponentField, &'a ExponentField);

fn shift_constants(s: &CoeffSeq, e_map: &dyn Fn(&DyadicCube) -> EBox, e: Exps) -> Result<[f64; 2]> {
    let std = sequence_norm(s, e.0, e.1, e.2)?;
    let sh = shifted_sequence_norm(s, e_map, e.0, e.1, e.2)?;
    if std == 0.0 && sh == 0.0 {
        return Ok([1.0, 1.0]);
    }
    Ok([std / sh, sh / std])
}

/// Compares the two sequence norms on the grids of `coarse` and `fine` exponents.
pub fn check_eq_shift(s: &CoeffSeq, e_map: &dyn Fn(&DyadicCube) -> EBox, coarse: Exps, fine: Exps) -> Result<ShiftReport> {
    let c = shift_constants(s, e_map, coarse)?;
    let f = shift_constants(s, e_map, fine)?;
    let d = drift(&c, &f);
    let pass = c.iter().chain(&f).all(|v| v.is_finite()) && d <= DRIFT_BUDGET;
    Ok(ShiftReport { constants: c, constants_refined: f, refinement_drift: d, pass })
}

/// Exponents on the line: `p`, and `α − 1/p`, taken from the row `x₂ = 0`.
fn line_exponents(params: &TLParams, setup: &TraceSetup, eps_gap: f64) -> Result<(ExponentField, ExponentField)> {
    let g = setup.source;
    let n = g.n();
    let h = g.spacing();
    // exponents must not depend on x₂ for |x₂| ≤ 1/2
    for i1 in 0..n {
        let x2 = g.wrap(i1 as f64 * h);
        if x2.abs() > 0.5 + 1e-12 {
            continue;
        }
        for i0 in 0..n {
            let a = g.flat_index([i0, i1]);
            let b = g.flat_index([i0, 0]);
            if params.p.samples[a] != params.p.samples[b] || params.alpha.samples[a] != params.alpha.samples[b] {
                return Err(Error::Precondition("exponents vary in x₂ near the line".into()));
            }
        }
    }
    let row = |e: &ExponentField| -> Vec<f64> { (0..n).map(|i| e.samples[g.flat_index([i, 0])]).collect() };
    let p = row(&params.p);
    let a = row(&params.alpha);
    let smooth: Vec<f64> = a.iter().zip(&p).map(|(a, p)| a - 1.0 / p).collect();
    for (s, p) in smooth.iter().zip(&p) {
        // (n−1)(1/p − 1)₊ with n = 2
        if s - (1.0 / p - 1.0).max(0.0) < eps_gap - 1e-12 {
            return Err(Error::Precondition(format!("alpha − 1/p = {s} below the gap {eps_gap}")));
        }
    }
    let pf = ExponentField::new(setup.target, p, params.p.declared_lower, params.p.declared_upper, Role::PrimaryP)?;
    let lo = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let af = ExponentField::new(setup.target, smooth, lo, hi, Role::SmoothnessAlpha)?;
    Ok((pf, af))
}

/// Trace-side norm over `‖f‖_F` per field; also returns the largest cube count.
pub fn trace_ratios(fields: &[SampledField], params: &TLParams, eps_gap: f64) -> Result<(Vec<Option<f64>>, usize)> {
    if !(eps_gap > 0.0) {
        return Err(Error::InvalidParameter("eps_gap must be positive".into()));
    }
    let setup = TraceSetup::new(params.pair.grid)?;
    let (p1, a1) = line_exponents(params, &setup, eps_gap)?;
    let q1 = ExponentField { role: Role::SecondaryQ, ..p1.clone() };
    let out: Vec<(Option<f64>, usize)> = fields
        .par_iter()
        .map(|f| -> Result<(Option<f64>, usize)> {
            let s = analyze(f, &params.pair)?;
            let t = trace_coeffs(&s, &setup)?;
            let num = sequence_norm(&t.coeffs, &p1, &q1, &a1)?;
            let den = f_norm(f, params)?;
            let r = if num == 0.0 && den == 0.0 { None } else { Some(num / den) };
            Ok((r, t.max_count))
        })
        .collect::<Result<_>>()?;
    let count = out.iter().map(|o| o.1).max().unwrap_or(0);
    Ok((out.into_iter().map(|o| o.0).collect(), count))
}

pub fn check_trace_bound(
    coarse: (&[SampledField], &TLParams),
    fine: (&[SampledField], &TLParams),
    eps_gap: f64,
) -> Result<(CheckReport, usize)> {
    let (rc, nc) = trace_ratios(coarse.0, coarse.1, eps_gap)?;
    let (rf, nf) = trace_ratios(fine.0, fine.1, eps_gap)?;
    let c = rc.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let cf = rf.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let vacuous = rc.iter().all(|r| r.is_none());
    let d = if vacuous { 0.0 } else { drift(&[c], &[cf]) };
    let pass = vacuous || (c.is_finite() && cf.is_finite() && d <= DRIFT_BUDGET);
    let digest = {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(coarse.1.digest().as_bytes());
        h.update(eps_gap.to_le_bytes());
        hex(&h.finalize())
    };
    let report = CheckReport {
        check_id: "trace-bound".into(),
        params_digest: digest,
        per_field_ratios: rc,
        c_measured: c,
        c_refined: Some(cf),
        refinement_drift: Some(d),
        budget: None,
        pass,
        warnings: vec![],
    };
    Ok((report, nc.max(nf)))
}
