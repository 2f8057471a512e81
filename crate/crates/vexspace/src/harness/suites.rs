use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use super::{generate_field, ExponentSpec, Recorder, SuiteConfig};
use crate::exponents::{ExponentField, Role};
use crate::lebesgue::{luxemburg_norm, modular, DEFAULT_REL_TOL};
use crate::mollifiers::{
    counterexample_curve, drift, eta, r_trick_check, verify_eta_lemma, verify_eta_vs_m, verify_multiplier,
    verify_vanishing_moment_bound, verify_weight_swap, EtaLemma, EtaLemmaParams,
};
use crate::phitransform::{analyze, ladder, make_admissible_pair, synthesize, AdmissiblePair, Profile};
use crate::sampling::{integrate, DyadicCube, Grid, SampledField};
use crate::tlspaces::{
    check_embedding, check_equivalence, check_lifting, check_littlewood_paley, check_sphi_bounded, equivalence_ratios,
    f_norm, littlewood_paley_ratios, TLParams, EQUIVALENCE_BUDGET,
};
use crate::traces::{check_eq_shift, check_trace_bound, EBox};
use crate::{Error, Result};

pub const SUITES: [&str; 12] = [
    "appendix",
    "counterexample",
    "equivalence",
    "sphi",
    "multiplier",
    "luxemburg",
    "reproducing",
    "parseval",
    "embedding",
    "lifting",
    "littlewood-paley",
    "trace",
];

pub(super) fn dispatch(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    match c.suite.as_str() {
        "appendix" => appendix(c, rec),
        "counterexample" => counterexample(c, rec),
        "equivalence" => equivalence(c, rec),
        "sphi" => sphi(c, rec),
        "multiplier" => multiplier(c, rec),
        "luxemburg" => luxemburg(c, rec),
        "reproducing" => reproducing(c, rec),
        "parseval" => parseval(c, rec),
        "embedding" => embedding(c, rec),
        "lifting" => lifting(c, rec),
        "littlewood-paley" => littlewood_paley(c, rec),
        "trace" => trace(c, rec),
        other => Err(Error::UnknownSuite(other.into())),
    }
}

fn field_seed(c: &SuiteConfig, i: usize) -> u64 {
    c.seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

fn band(c: &SuiteConfig) -> f64 {
    (c.nu_max as f64).exp2()
}

fn fields(c: &SuiteConfig, grid: &Grid, count: usize) -> Result<Vec<SampledField>> {
    (0..count).map(|i| generate_field(grid, band(c), field_seed(c, i))).collect()
}

fn exps(c: &SuiteConfig, grid: &Grid) -> Result<(ExponentField, ExponentField, ExponentField)> {
    Ok((
        c.p.sample(grid, Role::PrimaryP)?,
        c.q.sample(grid, Role::SecondaryQ)?,
        c.alpha.sample(grid, Role::SmoothnessAlpha)?,
    ))
}

fn params(c: &SuiteConfig, grid: &Grid, profile: Profile) -> Result<TLParams> {
    let (p, q, a) = exps(c, grid)?;
    TLParams::new(p, q, a, make_admissible_pair(grid, c.nu_max, profile)?)
}

fn luxemburg(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let fs = fields(c, &grid, c.fields)?;
    let tol = c.tolerances.luxemburg_rel;
    for p0 in c.extra_list("p_values", &[1.5, 2.0, 3.0]) {
        let p = ExponentField::constant(grid, p0, Role::PrimaryP)?;
        rec.run(&format!("constant-p-{p0}"), || {
            let mut worst = 0.0f64;
            for f in &fs {
                let n = luxemburg_norm(f, &p, DEFAULT_REL_TOL)?;
                let closed = modular(f, &p)?.powf(1.0 / p0);
                worst = worst.max((n - closed).abs() / closed);
            }
            Ok((worst <= tol, json!({ "p": p0, "max_rel_error": worst, "tolerance": tol })))
        })?;
    }
    let (pv, _, _) = exps(c, &grid)?;
    rec.run("unit-ball-variable-p", || {
        let mut worst = 0.0f64;
        for f in &fs {
            let n = luxemburg_norm(f, &pv, DEFAULT_REL_TOL)?;
            let r = modular(&f.scale(1.0 / n), &pv)?;
            worst = worst.max((r - 1.0).abs());
        }
        Ok((worst <= 5.0 * DEFAULT_REL_TOL, json!({ "max_modular_defect": worst })))
    })?;
    if grid.dim() == 1 && grid.half_length() >= 1.0 {
        rec.run("step-exponent", || {
            let f = SampledField::from_real_fn(grid, |x| if (0.0..1.0).contains(&x[0]) { 2.0 } else { 0.0 });
            let p = ExponentField::from_fn(grid, |x| if (0.5..1.0).contains(&x[0]) { 3.0 } else { 2.0 }, 2.0, 3.0, Role::PrimaryP)?;
            let n = luxemburg_norm(&f, &p, DEFAULT_REL_TOL)?;
            Ok(((n - 2.0).abs() <= tol, json!({ "norm": n, "expected": 2.0 })))
        })?;
    }
    Ok(())
}

fn reproducing(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let fs = fields(c, &grid, c.fields)?;
    for profile in [Profile::SmoothstepExp, Profile::SmoothstepPoly] {
        let pair = make_admissible_pair(&grid, c.nu_max, profile)?;
        rec.run(&format!("round-trip-{}", profile.id()), || {
            let mut errs = Vec::with_capacity(fs.len());
            for f in &fs {
                let back = synthesize(&analyze(f, &pair)?, &pair)?;
                errs.push(back.sub(f)?.l2_norm() / f.l2_norm());
            }
            let worst = errs.iter().cloned().fold(0.0, f64::max);
            Ok((
                worst <= c.tolerances.roundtrip_rel,
                json!({ "pair": pair.descriptor(), "per_field_rel_error": errs, "max_rel_error": worst }),
            ))
        })?;
    }
    Ok(())
}

fn parseval(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let fs = fields(c, &grid, c.fields)?;
    for profile in [Profile::SmoothstepExp, Profile::SmoothstepPoly] {
        let pair = make_admissible_pair(&grid, c.nu_max, profile)?;
        rec.run(&format!("partition-{}", profile.id()), || {
            let mut worst = 0.0f64;
            for f in &fs {
                let lad = ladder(f, &pair)?;
                let s: f64 = lad.levels.iter().map(|l| l.l2_norm().powi(2)).sum();
                let t = f.l2_norm().powi(2);
                worst = worst.max((s - t).abs() / t);
            }
            Ok((worst <= c.tolerances.parseval_rel, json!({ "max_rel_error": worst })))
        })?;
    }
    Ok(())
}

fn equivalence(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    let g1 = g0.refined();
    let (f0, f1) = (fields(c, &g0, c.fields)?, fields(c, &g1, c.fields)?);
    let a0 = params(c, &g0, Profile::SmoothstepExp)?;
    let b0 = a0.with_pair(make_admissible_pair(&g0, c.nu_max, Profile::SmoothstepPoly)?)?;
    let a1 = params(c, &g1, Profile::SmoothstepExp)?;
    let b1 = a1.with_pair(make_admissible_pair(&g1, c.nu_max, Profile::SmoothstepPoly)?)?;
    rec.run("identical-pairs", || {
        let r = equivalence_ratios(&f0, &a0, &a0)?;
        let worst = r.iter().flatten().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        Ok((worst <= 1e-12, json!({ "max_deviation": worst })))
    })?;
    rec.run("exp-vs-poly", || {
        let mut rep = check_equivalence((&f0, &a0, &b0), (&f1, &a1, &b1))?;
        rep.pass = rep.pass
            && rep.c_measured <= c.tolerances.equivalence_c
            && rep.refinement_drift.unwrap_or(0.0) <= c.tolerances.drift;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })
}

fn sphi(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    let g1 = g0.refined();
    let (f0, f1) = (fields(c, &g0, c.fields)?, fields(c, &g1, c.fields)?);
    let (p0, p1) = (params(c, &g0, Profile::SmoothstepExp)?, params(c, &g1, Profile::SmoothstepExp)?);
    rec.run("sphi-bounded", || {
        let rep = check_sphi_bounded((&f0, &p0), (&f1, &p1))?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })
}

fn multiplier(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let n = grid.dim() as f64;
    let m = c.extra_f64("m", n + 2.0);
    let (p, q, _) = exps(c, &grid)?;
    let levels = c.extra_list("nu_max_values", &[3.0, 6.0]);
    let mut maxima = Vec::new();
    for &nu in &levels {
        let nu = nu as u32;
        let pair = make_admissible_pair(&grid, nu, Profile::SmoothstepExp)?;
        let mut worst = 0.0f64;
        for i in 0..c.fields {
            let f = generate_field(&grid, (nu as f64).exp2(), field_seed(c, i))?;
            worst = worst.max(verify_multiplier(&ladder(&f, &pair)?, &p, &q, m)?);
        }
        maxima.push(worst);
    }
    rec.run("nu-max-stability", || {
        let (lo, hi) = (maxima[0], *maxima.last().expect("levels"));
        Ok((
            hi <= 2.0 * lo,
            json!({ "m": m, "nu_max_values": levels, "max_ratio": maxima, "ladders": c.fields }),
        ))
    })?;
    rec.run("constant-exponent-young", || {
        let p2 = ExponentField::constant(grid, 2.0, Role::PrimaryP)?;
        let q2 = ExponentField::constant(grid, 2.0, Role::SecondaryQ)?;
        let pair = make_admissible_pair(&grid, c.nu_max, Profile::SmoothstepExp)?;
        let mass = integrate(&eta(&grid, 0, m)?.periodized).re;
        let mut worst = 0.0f64;
        for i in 0..c.fields.min(10) {
            let f = generate_field(&grid, band(c), field_seed(c, i))?;
            worst = worst.max(verify_multiplier(&ladder(&f, &pair)?, &p2, &q2, m)?);
        }
        Ok((worst <= mass + 1e-6, json!({ "max_ratio": worst, "eta_mass": mass })))
    })
}

fn counterexample(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let q0 = c.extra_f64("q0", 3.0);
    let q1 = c.extra_f64("q1", 1.5);
    let p0 = c.extra_f64("p0", 2.0);
    let ks: Vec<usize> = c.extra_list("ks", &[16.0, 64.0, 256.0, 1024.0, 4096.0]).into_iter().map(|k| k as usize).collect();
    rec.run("growth-curve", || {
        let curve = counterexample_curve(&grid, q0, q1, p0, &ks)?;
        let i1024 = curve.ks.iter().position(|&k| k == 1024);
        let last = curve.ks.len() - 1;
        let r_growth = i1024.map(|i| curve.rhs[last] / curve.rhs[i] - 1.0);
        let pass = r_growth.map_or(true, |g| g < 0.01) && curve.r_squared >= 0.9 && curve.lhs[last] > curve.lhs[0];
        Ok((pass, json!({ "curve": curve, "rhs_growth_from_1024": r_growth })))
    })
}

fn appendix(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    let g1 = g0.refined();
    let n = g0.dim() as f64;
    let lemmas = [
        (EtaLemma::A1, EtaLemmaParams { nu0: 0, nu1: 3, m: 4.0, r: 1.0, cube: [0, 0] }),
        (EtaLemma::A2, EtaLemmaParams { nu0: 2, nu1: 2, m: n + 2.0, r: 1.0, cube: [1, 0] }),
        (EtaLemma::A3, EtaLemmaParams { nu0: 0, nu1: 0, m: n + 3.0, r: 1.0, cube: [0, 0] }),
        (EtaLemma::A3, EtaLemmaParams { nu0: 1, nu1: 3, m: n + 3.0, r: 1.0, cube: [0, 0] }),
        (EtaLemma::A4, EtaLemmaParams { nu0: 1, nu1: 3, m: 4.0 * n, r: 0.5, cube: [2, 0] }),
        (EtaLemma::A4, EtaLemmaParams { nu0: 1, nu1: 3, m: 4.0 * n, r: 1.0, cube: [2, 0] }),
    ];
    for (i, (id, p)) in lemmas.iter().enumerate() {
        rec.run(&format!("{id:?}-{i}"), || {
            let rep = verify_eta_lemma(*id, p, &g0)?;
            Ok((rep.pass, serde_json::to_value(rep)?))
        })?;
    }
    let seed = field_seed(c, 0);
    // r-trick on g = φ_ν ∗ f
    let nu = 3u32;
    let pair0 = make_admissible_pair(&g0, c.nu_max, Profile::SmoothstepExp)?;
    let pair1 = make_admissible_pair(&g1, c.nu_max, Profile::SmoothstepExp)?;
    let lg0 = ladder(&generate_field(&g0, band(c), seed)?, &pair0)?.levels[nu as usize].clone();
    let lg1 = ladder(&generate_field(&g1, band(c), seed)?, &pair1)?.levels[nu as usize].clone();
    for r in [1.0, 0.5] {
        rec.run(&format!("r-trick-{r}"), || {
            let rep = r_trick_check(&lg0, &lg1, r, nu, n + 2.0 / r)?;
            Ok((rep.pass, serde_json::to_value(rep)?))
        })?;
    }
    rec.run("eta-vs-maximal", || {
        let sq = |f: SampledField| f.map(|v| Complex64::new(v.norm_sqr(), 0.0));
        let a = sq(generate_field(&g0, band(c), seed)?);
        let b = sq(generate_field(&g1, band(c), seed)?);
        let rep = verify_eta_vs_m(3, n + 2.0, &a, &b)?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })?;
    rec.run("weight-swap", || {
        let spec = ExponentSpec::SineSquared { base: 0.0, amplitude: 0.5, frequency: 1.0, axis: 0 };
        let a0 = spec.sample(&g0, Role::SmoothnessAlpha)?;
        let a1 = spec.sample(&g1, Role::SmoothnessAlpha)?;
        let rep = verify_weight_swap(&a0, &a1, 5, n + 3.0)?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })?;
    rec.run("vanishing-moments", || {
        let (nu, mu, k) = (2u32, 3u32, 2u32);
        let (m0, m1) = (n + 2.0, n + k as f64 + 2.0);
        let atoms = |g: &Grid, pair: &AdmissiblePair| -> Result<(SampledField, SampledField)> {
            let mut delta = SampledField::zeros(*g);
            delta.values[0] = Complex64::new(1.0 / g.cell_volume(), 0.0);
            let lad = ladder(&delta, pair)?;
            let side = DyadicCube::new(mu, [0, 0]).volume(g.dim()).sqrt();
            Ok((lad.levels[nu as usize].clone(), lad.levels[mu as usize].scale(side)))
        };
        let (ga, ha) = atoms(&g0, &pair0)?;
        let (gb, hb) = atoms(&g1, &pair1)?;
        let rep = verify_vanishing_moment_bound(&ga, &ha, &gb, &hb, k, nu, mu, m0, m1)?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })
}

fn embedding(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let grid = c.grid()?;
    let fs = fields(c, &grid, c.fields)?;
    let pairs = c.extra_f64("pairs", 50.0) as usize;
    let (p, _, _) = exps(c, &grid)?;
    let pair = make_admissible_pair(&grid, c.nu_max, Profile::SmoothstepExp)?;
    let mut rng = ChaCha20Rng::seed_from_u64(c.seed ^ 0x00e1_b0d5);
    let add = |a: &ExponentField, b: &ExponentField, role: Role| -> Result<ExponentField> {
        let s = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
        ExponentField::new(grid, s, a.declared_lower + b.declared_lower, a.declared_upper + b.declared_upper, role)
    };
    let mut total = 0usize;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for i in 0..pairs {
        let mut draw = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let a1 = ExponentSpec::SineSquared { base: draw(0.0, 0.5), amplitude: draw(0.0, 0.5), frequency: 1.0, axis: 0 }
            .sample(&grid, Role::SmoothnessAlpha)?;
        let da = ExponentSpec::SineSquared { base: draw(0.0, 0.5), amplitude: draw(0.0, 0.5), frequency: 1.0, axis: 0 }
            .sample(&grid, Role::SmoothnessAlpha)?;
        let q0 = ExponentSpec::Sine { base: draw(1.5, 2.5), amplitude: draw(0.0, 0.4), frequency: 1.0, phase: draw(0.0, 6.3), axis: 0 }
            .sample(&grid, Role::SecondaryQ)?;
        let dq = ExponentSpec::SineSquared { base: draw(0.0, 1.0), amplitude: draw(0.0, 1.0), frequency: 1.0, axis: 0 }
            .sample(&grid, Role::SmoothnessAlpha)?;
        let a0 = add(&a1, &da, Role::SmoothnessAlpha)?;
        let q1 = add(&q0, &dq, Role::SecondaryQ)?;
        let par0 = TLParams::new(p.clone(), q0, a0, pair.clone())?;
        let par1 = TLParams::new(p.clone(), q1, a1, pair.clone())?;
        let rep = check_embedding(&fs, &par0, &par1)?;
        total += rep.violations;
        let mx = rep.per_field_ratios.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
        worst = worst.max(mx);
        details.push(json!({ "pair": i, "violations": rep.violations, "max_ratio": mx }));
    }
    rec.run("ordered-pairs", || {
        Ok((total == 0, json!({ "pairs": pairs, "fields": fs.len(), "violations": total, "max_ratio": worst, "per_pair": details })))
    })?;

    // p₀ > p₁: not a pointwise inequality, so only a bounded, resolution-stable ratio
    let drop = c.extra_f64("p_drop", 0.5);
    rec.run("unequal-p-measured", || {
        let mut consts = [0.0f64; 2];
        for (slot, g) in [grid, grid.refined()].into_iter().enumerate() {
            let fg = fields(c, &g, c.fields)?;
            let par0 = params(c, &g, Profile::SmoothstepExp)?;
            let par1 = TLParams::new(par0.p.shifted(-drop)?, par0.q.clone(), par0.alpha.clone(), par0.pair.clone())?;
            for f in &fg {
                let (n0, n1) = (f_norm(f, &par0)?, f_norm(f, &par1)?);
                if n0 > 0.0 {
                    consts[slot] = consts[slot].max(n1 / n0);
                }
            }
        }
        let d = drift(&consts[..1], &consts[1..]);
        let pass = consts.iter().all(|v| v.is_finite()) && consts[0] <= EQUIVALENCE_BUDGET && d <= c.tolerances.drift;
        Ok((pass, json!({ "p_drop": drop, "c_measured": consts[0], "c_refined": consts[1], "refinement_drift": d, "budget": EQUIVALENCE_BUDGET })))
    })
}

fn lifting(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    let g1 = g0.refined();
    let (f0, f1) = (fields(c, &g0, c.fields)?, fields(c, &g1, c.fields)?);
    let (p0, p1) = (params(c, &g0, Profile::SmoothstepExp)?, params(c, &g1, Profile::SmoothstepExp)?);
    for sigma in c.extra_list("sigmas", &[0.5, 1.0]) {
        rec.run(&format!("sigma-{sigma}"), || {
            let mut rep = check_lifting((&f0, &p0), (&f1, &p1), sigma)?;
            rep.pass = rep.pass && rep.c_measured <= c.tolerances.lifting_c;
            Ok((rep.pass, serde_json::to_value(rep)?))
        })?;
    }
    Ok(())
}

fn littlewood_paley(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    let g1 = g0.refined();
    let (f0, f1) = (fields(c, &g0, c.fields)?, fields(c, &g1, c.fields)?);
    let pair0 = make_admissible_pair(&g0, c.nu_max, Profile::SmoothstepExp)?;
    let pair1 = make_admissible_pair(&g1, c.nu_max, Profile::SmoothstepExp)?;
    rec.run("p-two-parseval", || {
        let p2 = ExponentField::constant(g0, 2.0, Role::PrimaryP)?;
        let r = littlewood_paley_ratios(&f0, &p2, &pair0)?;
        let worst = r.iter().flatten().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        Ok((worst <= 1e-10, json!({ "max_deviation": worst })))
    })?;
    rec.run("variable-p", || {
        let pa = c.p.sample(&g0, Role::PrimaryP)?;
        let pb = c.p.sample(&g1, Role::PrimaryP)?;
        let rep = check_littlewood_paley((&f0, &pa, &pair0), (&f1, &pb, &pair1))?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })
}

fn trace(c: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let g0 = c.grid()?;
    if g0.dim() != 2 {
        return Err(Error::InvalidParameter("the trace suite runs on a 2D grid".into()));
    }
    let g1 = g0.refined();
    let (f0, f1) = (fields(c, &g0, c.fields)?, fields(c, &g1, c.fields)?);
    let eps = c.extra_f64("eps_gap", 0.25);
    let constant = SuiteConfig {
        p: ExponentSpec::constant(2.0),
        q: ExponentSpec::constant(2.0),
        alpha: ExponentSpec::constant(1.0),
        ..c.clone()
    };
    for (label, cfg) in [("constant", &constant), ("configured", c)] {
        let (a, b) = (params(cfg, &g0, Profile::SmoothstepExp)?, params(cfg, &g1, Profile::SmoothstepExp)?);
        rec.run(&format!("trace-bound-{label}"), || {
            let (rep, count) = check_trace_bound((&f0, &a), (&f1, &b), eps)?;
            Ok((rep.pass && count <= 30, json!({ "report": rep, "max_cube_count": count })))
        })?;
    }
    let (pa, qa, aa) = exps(c, &g0)?;
    let (pb, qb, ab) = exps(c, &g1)?;
    let pair0 = make_admissible_pair(&g0, c.nu_max, Profile::SmoothstepExp)?;
    let s = analyze(&f0[0], &pair0)?;
    let boxes: [(&str, EBox); 2] = [("whole", EBox::WHOLE), ("upper-quarter", EBox::UPPER_QUARTER)];
    for (label, b) in boxes {
        rec.run(&format!("eq-shift-{label}"), || {
            let rep = check_eq_shift(&s, &|_| b, (&pa, &qa, &aa), (&pb, &qb, &ab))?;
            Ok((rep.pass, serde_json::to_value(rep)?))
        })?;
    }
    rec.run("eq-shift-neighbour-quarter", || {
        let mut single = crate::sampling::CoeffSeq::new(c.nu_max);
        single.insert(DyadicCube::new(2, [1, 1]), Complex64::new(1.0, 0.0));
        let b = EBox { offset: [1.0, 0.75], extent: [1.0, 0.25] };
        let rep = check_eq_shift(&single, &|_| b, (&pa, &qa, &aa), (&pb, &qb, &ab))?;
        Ok((rep.pass, serde_json::to_value(rep)?))
    })
}
