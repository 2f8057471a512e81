//! Modular, Luxemburg norm and the mixed `L^{p(·)}(l^{q(·)})` norms.

use rayon::prelude::*;

use crate::exponents::ExponentField;
use crate::sampling::{cube_points, CoeffSeq, Grid, SampledField};
use crate::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200;

/// The family `{f_ν}` for `ν = 0..=ν_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ladder {
    pub grid: Grid,
    pub levels: Vec<SampledField>,
}

impl Ladder {
    pub fn new(grid: Grid, levels: Vec<SampledField>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidParameter("a ladder needs nu_max >= 1".into()));
        }
        if levels.iter().any(|l| l.grid != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, levels })
    }

    pub fn nu_max(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }
}

fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

/// `∫ |f|^{p(x)}` on samples of `|f|`.
pub fn modular_abs(abs: &[f64], p: &[f64], cell: f64) -> f64 {
    abs.iter().zip(p).map(|(a, e)| if *a == 0.0 { 0.0 } else { a.powf(*e) }).sum::<f64>() * cell
}

/// `ρ(f) = ∫ |f(x)|^{p(x)} dx`.
pub fn modular(f: &SampledField, p: &ExponentField) -> Result<f64> {
    check_grid(&f.grid, &p.grid)?;
    Ok(modular_abs(&f.abs(), &p.samples, f.grid.cell_volume()))
}

/// Luxemburg norm of samples `|f|` by bracketing and geometric bisection.
///
/// Returns `λ` with `ρ(f/λ) ≤ 1 ≤ ρ(f/(λ(1−rel_tol)))`.
pub fn luxemburg_abs(abs: &[f64], p: &[f64], p_lo: f64, p_hi: f64, cell: f64, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(Error::InvalidParameter(format!("rel_tol {rel_tol} outside (0, 1e-2]")));
    }
    let rho = |lam: f64| -> f64 {
        abs.iter()
            .zip(p)
            .map(|(a, e)| if *a == 0.0 { 0.0 } else { (a / lam).powf(*e) })
            .sum::<f64>()
            * cell
    };
    let r0 = modular_abs(abs, p, cell);
    if r0 == 0.0 {
        return Ok(0.0);
    }
    if !r0.is_finite() {
        return Err(Error::InvalidParameter("modular is not finite".into()));
    }
    let a = r0.powf(1.0 / p_hi);
    let b = r0.powf(1.0 / p_lo);
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    if lo == hi {
        // constant exponent: the bracket is the closed form
        return Ok(hi);
    }
    let mut iters = 0;
    while rho(hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if iters > MAX_ITERATIONS {
            return Err(Error::NonConvergence(iters));
        }
    }
    while rho(lo) < 1.0 {
        hi = lo;
        lo *= 0.5;
        iters += 1;
        if iters > MAX_ITERATIONS {
            return Err(Error::NonConvergence(iters));
        }
    }
    let mut it = 0;
    while hi > lo * (1.0 + rel_tol) {
        if it >= MAX_ITERATIONS {
            return Err(Error::NonConvergence(it));
        }
        it += 1;
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `‖f‖_{L^{p(·)}} = inf{λ > 0 : ρ(f/λ) ≤ 1}`.
pub fn luxemburg_norm(f: &SampledField, p: &ExponentField, rel_tol: f64) -> Result<f64> {
    check_grid(&f.grid, &p.grid)?;
    luxemburg_abs(&f.abs(), &p.samples, p.declared_lower, p.declared_upper, f.grid.cell_volume(), rel_tol)
}

/// Pointwise `(Σ_ν |2^{να(x)} f_ν(x)|^{q(x)})^{1/q(x)}` for magnitudes `abs_levels[ν][x]`.
pub fn inner_lq(abs_levels: &[Vec<f64>], q: &[f64], alpha: &[f64]) -> Vec<f64> {
    let npts = q.len();
    (0..npts)
        .into_par_iter()
        .map(|i| {
            let qi = q[i];
            // factor out the largest term so large weights do not overflow
            let terms: Vec<f64> = abs_levels
                .iter()
                .enumerate()
                .map(|(nu, lv)| lv[i] * (nu as f64 * alpha[i]).exp2())
                .collect();
            let top = terms.iter().fold(0.0f64, |m, &t| m.max(t));
            if top == 0.0 {
                return 0.0;
            }
            let s: f64 = terms.iter().map(|t| (t / top).powf(qi)).sum();
            top * s.powf(1.0 / qi)
        })
        .collect()
}

/// `‖ ‖2^{να(x)} f_ν(x)‖_{l^{q(x)}_ν} ‖_{L^{p(·)}_x}`.
pub fn mixed_norm(
    ladder: &Ladder,
    p: &ExponentField,
    q: &ExponentField,
    alpha: &ExponentField,
) -> Result<f64> {
    mixed_norm_tol(ladder, p, q, alpha, DEFAULT_REL_TOL)
}

pub fn mixed_norm_tol(
    ladder: &Ladder,
    p: &ExponentField,
    q: &ExponentField,
    alpha: &ExponentField,
    rel_tol: f64,
) -> Result<f64> {
    check_grid(&ladder.grid, &p.grid)?;
    check_grid(&ladder.grid, &q.grid)?;
    check_grid(&ladder.grid, &alpha.grid)?;
    let abs: Vec<Vec<f64>> = ladder.levels.iter().map(|l| l.abs()).collect();
    let g = inner_lq(&abs, &q.samples, &alpha.samples);
    luxemburg_abs(&g, &p.samples, p.declared_lower, p.declared_upper, ladder.grid.cell_volume(), rel_tol)
}

/// Level magnitudes `Σ_{Q∈D_ν} |s_Q| |Q|^{-1/2} χ_Q` on the grid.
pub fn sequence_levels(s: &CoeffSeq, grid: &Grid) -> Result<Vec<Vec<f64>>> {
    let dim = grid.dim();
    let mut levels = vec![vec![0.0; grid.len()]; s.nu_max as usize + 1];
    for (q, v) in &s.entries {
        if q.level > s.nu_max {
            return Err(Error::InvalidParameter(format!("cube level {} above nu_max", q.level)));
        }
        let a = v.norm() / q.volume(dim).sqrt();
        if a == 0.0 {
            continue;
        }
        for i in cube_points(grid, q)? {
            levels[q.level as usize][i] += a;
        }
    }
    Ok(levels)
}

/// `‖{s_Q}‖_{f^{α(·)}_{p(·),q(·)}}` through the indicator expansion.
pub fn sequence_norm(s: &CoeffSeq, p: &ExponentField, q: &ExponentField, alpha: &ExponentField) -> Result<f64> {
    sequence_norm_tol(s, p, q, alpha, DEFAULT_REL_TOL)
}

pub fn sequence_norm_tol(
    s: &CoeffSeq,
    p: &ExponentField,
    q: &ExponentField,
    alpha: &ExponentField,
    rel_tol: f64,
) -> Result<f64> {
    check_grid(&p.grid, &q.grid)?;
    check_grid(&p.grid, &alpha.grid)?;
    let grid = p.grid;
    let levels = sequence_levels(s, &grid)?;
    let g = inner_lq(&levels, &q.samples, &alpha.samples);
    luxemburg_abs(&g, &p.samples, p.declared_lower, p.declared_upper, grid.cell_volume(), rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Role;
    use num_complex::Complex64;

    fn grid() -> Grid {
        Grid::new(1, 256, 1.0).unwrap()
    }

    fn indicator(g: Grid, c: f64) -> SampledField {
        SampledField::from_real_fn(g, |x| if x[0] < 1.0 { c } else { 0.0 })
    }

    fn step_p(g: Grid) -> ExponentField {
        ExponentField::from_fn(g, |x| if (0.5..1.0).contains(&x[0]) { 3.0 } else { 2.0 }, 2.0, 3.0, Role::PrimaryP)
            .unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = grid();
        let p2 = ExponentField::constant(g, 2.0, Role::PrimaryP).unwrap();
        assert!((modular(&indicator(g, 1.0), &step_p(g)).unwrap() - 1.0).abs() < 1e-12);
        assert!((modular(&indicator(g, 2.0), &p2).unwrap() - 4.0).abs() < 1e-12);
        assert!((modular(&indicator(g, 2.0), &step_p(g)).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn step_exponent_norm_is_two() {
        let g = grid();
        let n = luxemburg_norm(&indicator(g, 2.0), &step_p(g), 1e-10).unwrap();
        assert!((n - 2.0).abs() < 1e-8, "{n}");
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = grid();
        let p = step_p(g);
        assert_eq!(luxemburg_norm(&SampledField::zeros(g), &p, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let g = grid();
        assert!(luxemburg_norm(&indicator(g, 1.0), &step_p(g), 0.5).is_err());
    }

    #[test]
    fn single_level_mixed_norm() {
        let g = grid();
        let p2 = ExponentField::constant(g, 2.0, Role::PrimaryP).unwrap();
        let q = ExponentField::constant(g, 1.3, Role::SecondaryQ).unwrap();
        let a0 = ExponentField::constant(g, 0.0, Role::SmoothnessAlpha).unwrap();
        let c = Complex64::new(1.7, 0.0);
        let ladder = Ladder::new(g, vec![SampledField::zeros(g), SampledField::constant(g, c), SampledField::zeros(g)])
            .unwrap();
        let v = mixed_norm(&ladder, &p2, &q, &a0).unwrap();
        assert!((v - 1.7 * 2f64.sqrt()).abs() < 1e-12);
    }
}
