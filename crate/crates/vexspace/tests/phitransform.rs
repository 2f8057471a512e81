use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use vexspace::harness::generate_field;
use vexspace::phitransform::*;
use vexspace::sampling::{cubes_at_level, CoeffSeq, DyadicCube, Grid, SampledField};

fn u_exp(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = (-1.0 / (2.0 - t)).exp();
        let b = (-1.0 / (t - 1.0)).exp();
        a / (a + b)
    }
}

fn u_poly(t: f64) -> f64 {
    let s = (t - 1.0).clamp(0.0, 1.0);
    1.0 - 10.0 * s.powi(3) + 15.0 * s.powi(4) - 6.0 * s.powi(5)
}

/// Level multiplier rebuilt from the profile: `√u` at level 0, `√(u(t)−u(2t))` at `t = 2^{-ν}r`.
fn level_oracle(u: fn(f64) -> f64, nu: u32, r: f64) -> f64 {
    if nu == 0 {
        u(r).sqrt()
    } else {
        let t = r / (nu as f64).exp2();
        (u(t) - u(2.0 * t)).max(0.0).sqrt()
    }
}

fn profiles() -> [(Profile, fn(f64) -> f64); 2] {
    [(Profile::SmoothstepExp, u_exp), (Profile::SmoothstepPoly, u_poly)]
}

#[test]
fn profiles_match_their_formulas() {
    for (p, u) in profiles() {
        for i in 0..=300 {
            let t = i as f64 / 100.0;
            // Horner form in the library, expanded form here
            assert!((p.u(t) - u(t)).abs() < 4e-15, "{} at {t}", p.id());
        }
        assert_eq!(Profile::parse(p.id()).unwrap(), p);
    }
    assert!(Profile::parse("smoothstep").is_err());
}

#[test]
fn pair_constant_and_residual() {
    let g = Grid::new(1, 1024, 1.0).unwrap();
    for (p, u) in profiles() {
        for nu_max in [1, 3, 6] {
            let pair = make_admissible_pair(&g, nu_max, p).unwrap();
            let c = (1.0 - u(1.2)).sqrt().min(u(5.0 / 3.0).sqrt());
            assert!((pair.lower_bound_c - c).abs() < 1e-15);
            assert!(pair.lower_bound_c > 0.0);
            assert!(pair.identity_residual <= 1e-14);
            let d = pair.descriptor();
            assert_eq!((d.profile_id.as_str(), d.nu_max), (p.id(), nu_max));
        }
    }
}

#[test]
fn multipliers_on_grid_bins() {
    for g in [Grid::new(1, 512, 1.5).unwrap(), Grid::new(2, 64, 1.0).unwrap()] {
        for (p, u) in profiles() {
            let pair = make_admissible_pair(&g, 3, p).unwrap();
            for i in 0..g.len() {
                let r = g.frequency_norm(i);
                let mut total = 0.0;
                for nu in 0..=3 {
                    let m = pair.multiplier(nu, i);
                    // compare squares: the square root amplifies rounding near the support edge
                    assert!((m * m - level_oracle(u, nu, r).powi(2)).abs() < 1e-14);
                    assert!((pair.level_hat(nu, r) - m).abs() < 1e-15);
                    if nu >= 1 && m != 0.0 {
                        let t = r / (nu as f64).exp2();
                        assert!((0.5..=2.0).contains(&t));
                    }
                    total += m * m;
                }
                if r <= 8.0 {
                    assert!((total - 1.0).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn nyquist_bound_on_levels() {
    // N = 128, L = 1: Nyquist is 64π ≈ 201, so 2^{ν+1} ≤ 201 allows ν ≤ 6
    let g = Grid::new(1, 128, 1.0).unwrap();
    assert!(make_admissible_pair(&g, 6, Profile::SmoothstepPoly).is_ok());
    assert!(make_admissible_pair(&g, 7, Profile::SmoothstepPoly).is_err());
}

#[test]
fn ladder_of_a_pure_wave() {
    let g = Grid::new(1, 1024, 1.0).unwrap();
    let pair = make_admissible_pair(&g, 6, Profile::SmoothstepExp).unwrap();
    for k in [0i64, 1, 3, 7, 20] {
        let xi = PI * k as f64;
        let f = SampledField::from_fn(g, |x| Complex64::from_polar(1.0, xi * x[0]));
        let lad = ladder(&f, &pair).unwrap();
        for nu in 0..=6 {
            let m = level_oracle(u_exp, nu, xi);
            let want = f.scale(m);
            assert!(lad.levels[nu as usize].sub(&want).unwrap().max_abs() < 1e-12);
        }
        let s = analyze(&f, &pair).unwrap();
        for nu in 0..=6u32 {
            for q in cubes_at_level(&g, nu).unwrap() {
                let x = q.corner()[0];
                let want = Complex64::from_polar(q.volume(1).sqrt() * level_oracle(u_exp, nu, xi), xi * x);
                assert!((s.get(&q) - want).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn synthesis_of_one_coefficient_is_a_shifted_atom() {
    let g = Grid::new(1, 256, 1.0).unwrap();
    let pair = make_admissible_pair(&g, 4, Profile::SmoothstepPoly).unwrap();
    let q = DyadicCube::new(3, [5, 0]);
    let mut s = CoeffSeq::new(4);
    let c = Complex64::new(0.7, -0.2);
    s.insert(q, c);
    let out = synthesize(&s, &pair).unwrap();
    let xq = q.corner()[0];
    let amp = c * q.volume(1).sqrt() / g.period();
    for i in 0..g.len() {
        let x = g.coords(i)[0];
        let mut v = Complex64::new(0.0, 0.0);
        for k in -(g.n() as i64) / 2..(g.n() as i64) / 2 {
            let xi = PI * k as f64;
            v += level_oracle(u_poly, 3, xi.abs()) * Complex64::from_polar(1.0, xi * (x - xq));
        }
        assert!((out.values[i] - amp * v).norm() < 1e-12);
    }
}

#[test]
fn round_trip_in_two_dimensions() {
    let g = Grid::new(2, 128, 1.0).unwrap();
    let pair = make_admissible_pair(&g, 4, Profile::SmoothstepExp).unwrap();
    let f = generate_field(&g, 16.0, 9).unwrap();
    let back = synthesize(&analyze(&f, &pair).unwrap(), &pair).unwrap();
    assert!(back.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
}

#[test]
fn mismatched_inputs_are_rejected() {
    let g = Grid::new(1, 256, 1.0).unwrap();
    let pair = make_admissible_pair(&g, 4, Profile::SmoothstepExp).unwrap();
    let other = SampledField::zeros(Grid::new(1, 512, 1.0).unwrap());
    assert!(ladder(&other, &pair).is_err());
    let mut s = CoeffSeq::new(6);
    s.insert(DyadicCube::new(6, [0, 0]), Complex64::new(1.0, 0.0));
    assert!(synthesize(&s, &pair).is_err());
}

#[test]
fn bessel_potential_on_waves() {
    let g = Grid::new(1, 256, 1.0).unwrap();
    let xi = 5.0 * PI;
    let f = SampledField::from_fn(g, |x| Complex64::from_polar(1.0, xi * x[0]));
    for sigma in [-1.0, 0.5, 2.0] {
        let want = f.scale((1.0 + xi * xi).powf(-sigma / 2.0));
        assert!(bessel_potential(&f, sigma).sub(&want).unwrap().max_abs() < 1e-12 * want.max_abs());
    }
}

fn lowpass(seed: u64) -> (Grid, SampledField, AdmissiblePair) {
    let g = Grid::new(1, 512, 1.0).unwrap();
    let pair = make_admissible_pair(&g, 5, Profile::SmoothstepExp).unwrap();
    (g, generate_field(&g, 32.0, seed).unwrap(), pair)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reproducing_identity(seed in 0u64..10_000) {
        let (_, f, pair) = lowpass(seed);
        let back = synthesize(&analyze(&f, &pair).unwrap(), &pair).unwrap();
        prop_assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn analysis_and_synthesis_are_adjoint(s1 in 0u64..10_000, s2 in 0u64..10_000) {
        let (_, f, pair) = lowpass(s1);
        let (_, h, _) = lowpass(s2 + 77);
        let t = analyze(&h, &pair).unwrap();
        let lhs = sequence_inner(&analyze(&f, &pair).unwrap(), &t);
        let rhs = f.inner(&synthesize(&t, &pair).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn analysis_is_linear(s1 in 0u64..10_000, s2 in 0u64..10_000, a in -3.0f64..3.0) {
        let (_, f, pair) = lowpass(s1);
        let (_, h, _) = lowpass(s2 + 13);
        let sum = analyze(&f.scale(a).add(&h).unwrap(), &pair).unwrap();
        let (sf, sh) = (analyze(&f, &pair).unwrap(), analyze(&h, &pair).unwrap());
        for (q, v) in &sum.entries {
            prop_assert!((v - (sf.get(q) * a + sh.get(q))).norm() < 1e-12);
        }
    }

    #[test]
    fn bessel_semigroup(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (_, f, _) = lowpass(seed);
        let two = bessel_potential(&bessel_potential(&f, a), b);
        let one = bessel_potential(&f, a + b);
        prop_assert!(two.sub(&one).unwrap().max_abs() <= 1e-10 * one.max_abs());
    }
}
