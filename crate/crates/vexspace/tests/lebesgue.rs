use num_complex::Complex64;
use proptest::prelude::*;

use vexspace::exponents::{ExponentField, Role};
use vexspace::lebesgue::*;
use vexspace::sampling::{CoeffSeq, DyadicCube, Grid, SampledField};

fn grid() -> Grid {
    Grid::new(1, 256, 1.0).unwrap()
}

/// Root of `Σ_k w_k (a_k/λ)^{p_k} = 1` by plain bisection on λ.
fn piecewise_norm(parts: &[(f64, f64, f64)]) -> f64 {
    let rho = |lam: f64| parts.iter().map(|(w, a, p)| w * (a / lam).powf(*p)).sum::<f64>();
    let (mut lo, mut hi) = (1e-6, 1e6);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn step_example_has_norm_two() {
    let g = grid();
    let f = SampledField::from_real_fn(g, |x| if x[0] < 1.0 { 2.0 } else { 0.0 });
    let p = ExponentField::from_fn(g, |x| if (0.5..1.0).contains(&x[0]) { 3.0 } else { 2.0 }, 2.0, 3.0, Role::PrimaryP).unwrap();
    let n = luxemburg_norm(&f, &p, 1e-10).unwrap();
    assert!((n - 2.0).abs() < 1e-9, "{n}");
}

#[test]
fn piecewise_constant_matches_independent_root() {
    let g = grid();
    // |f| = 3 on [0, 0.5), 0.4 on [0.5, 2); p = 1.5 and 4 there
    let f = SampledField::from_real_fn(g, |x| if x[0] < 0.5 { 3.0 } else { -0.4 });
    let p = ExponentField::from_fn(g, |x| if x[0] < 0.5 { 1.5 } else { 4.0 }, 1.5, 4.0, Role::PrimaryP).unwrap();
    let want = piecewise_norm(&[(0.5, 3.0, 1.5), (1.5, 0.4, 4.0)]);
    let got = luxemburg_norm(&f, &p, 1e-10).unwrap();
    assert!((got - want).abs() < 2e-10 * want, "{got} vs {want}");
}

#[test]
fn constant_exponent_is_closed_form() {
    let g = grid();
    let f = SampledField::from_real_fn(g, |x| (std::f64::consts::PI * x[0]).sin());
    for p0 in [1.0, 1.5, 2.0, 3.0, 7.0] {
        let p = ExponentField::constant(g, p0, Role::PrimaryP).unwrap();
        let direct = (f.values.iter().map(|v| v.norm().powf(p0)).sum::<f64>() * g.spacing()).powf(1.0 / p0);
        assert!((luxemburg_norm(&f, &p, 1e-8).unwrap() - direct).abs() < 1e-13 * direct);
    }
    // ‖sin‖_2 on a length-2 period is 1
    let p = ExponentField::constant(g, 2.0, Role::PrimaryP).unwrap();
    assert!((luxemburg_norm(&f, &p, 1e-8).unwrap() - 1.0).abs() < 1e-13);
}

#[test]
fn zero_and_bad_tolerance() {
    let g = grid();
    let p = ExponentField::constant(g, 2.0, Role::PrimaryP).unwrap();
    assert_eq!(luxemburg_norm(&SampledField::zeros(g), &p, 1e-8).unwrap(), 0.0);
    let f = SampledField::constant(g, Complex64::new(1.0, 0.0));
    assert!(luxemburg_norm(&f, &p, 0.0).is_err());
    assert!(luxemburg_norm(&f, &p, 0.5).is_err());
    let other = ExponentField::constant(Grid::new(1, 128, 1.0).unwrap(), 2.0, Role::PrimaryP).unwrap();
    assert!(luxemburg_norm(&f, &other, 1e-8).is_err());
}

#[test]
fn mixed_norm_with_equal_constant_exponents_decouples() {
    let g = grid();
    let levels: Vec<SampledField> = (0..4)
        .map(|nu| SampledField::from_real_fn(g, move |x| ((nu + 1) as f64 * std::f64::consts::PI * x[0]).cos() / (nu + 1) as f64))
        .collect();
    let lad = Ladder::new(g, levels.clone()).unwrap();
    let p0 = 2.5;
    let a0 = 0.75;
    let p = ExponentField::constant(g, p0, Role::PrimaryP).unwrap();
    let q = ExponentField::constant(g, p0, Role::SecondaryQ).unwrap();
    let a = ExponentField::constant(g, a0, Role::SmoothnessAlpha).unwrap();
    let direct: f64 = levels
        .iter()
        .enumerate()
        .map(|(nu, l)| (nu as f64 * a0 * p0).exp2() * l.values.iter().map(|v| v.norm().powf(p0)).sum::<f64>() * g.spacing())
        .sum::<f64>()
        .powf(1.0 / p0);
    let got = mixed_norm_tol(&lad, &p, &q, &a, 1e-10).unwrap();
    assert!((got - direct).abs() < 1e-10 * direct);
}

#[test]
fn inner_lq_avoids_overflow() {
    let big = vec![vec![1.0], vec![1.0]];
    let out = inner_lq(&big, &[2.0], &[600.0]);
    // 2^600 overflows to inf when raised to q naively
    assert!(out[0].is_finite());
    assert!((out[0] / 600f64.exp2() - 1.0).abs() < 1e-15);
}

#[test]
fn single_cube_sequence_norm() {
    let g = grid();
    let (p0, a0) = (3.0, 0.5);
    let p = ExponentField::constant(g, p0, Role::PrimaryP).unwrap();
    let q = ExponentField::constant(g, 1.7, Role::SecondaryQ).unwrap();
    let a = ExponentField::constant(g, a0, Role::SmoothnessAlpha).unwrap();
    let cube = DyadicCube::new(3, [5, 0]);
    let mut s = CoeffSeq::new(4);
    s.insert(cube, Complex64::new(0.0, -2.0));
    let vol = cube.volume(1);
    let want = 2.0 * (3.0 * a0).exp2() * vol.powf(1.0 / p0 - 0.5);
    let got = sequence_norm_tol(&s, &p, &q, &a, 1e-10).unwrap();
    assert!((got - want).abs() < 1e-10 * want);

    let mut deep = CoeffSeq::new(2);
    deep.insert(cube, Complex64::new(1.0, 0.0));
    assert!(sequence_norm(&deep, &p, &q, &a).is_err());
}

fn sample_field(seed: u64) -> SampledField {
    let g = grid();
    let k = (seed % 5 + 1) as f64;
    let ph = seed as f64 * 0.37;
    SampledField::from_real_fn(g, move |x| (k * std::f64::consts::PI * x[0] + ph).sin() + 0.3 * (ph * x[0]).cos())
}

fn variable_p(lo: f64, amp: f64) -> ExponentField {
    let g = grid();
    ExponentField::from_fn(g, |x| lo + amp * (1.0 + (std::f64::consts::PI * x[0]).sin()), lo, lo + 2.0 * amp, Role::PrimaryP).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn unit_ball_bracket(seed in 0u64..500, lo in 1.0f64..3.0, amp in 0.0f64..1.5) {
        let (f, p) = (sample_field(seed), variable_p(lo, amp));
        let tol = 1e-8;
        let n = luxemburg_norm(&f, &p, tol).unwrap();
        let rho = |lam: f64| modular(&f.scale(1.0 / lam), &p).unwrap();
        prop_assert!(rho(n) <= 1.0 + 1e-12);
        prop_assert!(rho(n * (1.0 - tol)) >= 1.0 - 1e-12);
    }

    #[test]
    fn homogeneity(seed in 0u64..500, c in 1e-3f64..1e3, lo in 1.0f64..3.0, amp in 0.0f64..1.5) {
        let (f, p) = (sample_field(seed), variable_p(lo, amp));
        let a = luxemburg_norm(&f, &p, 1e-10).unwrap();
        let b = luxemburg_norm(&f.scale(c), &p, 1e-10).unwrap();
        prop_assert!((b / (c * a) - 1.0).abs() < 5e-10);
    }

    #[test]
    fn triangle_inequality(s1 in 0u64..500, s2 in 0u64..500, lo in 1.0f64..3.0, amp in 0.0f64..1.5) {
        let (f, g, p) = (sample_field(s1), sample_field(s2 + 1000), variable_p(lo, amp));
        let tol = 1e-10;
        let sum = luxemburg_norm(&f.add(&g).unwrap(), &p, tol).unwrap();
        let parts = luxemburg_norm(&f, &p, tol).unwrap() + luxemburg_norm(&g, &p, tol).unwrap();
        prop_assert!(sum <= parts * (1.0 + 2.0 * tol));
    }

    #[test]
    fn monotone_in_pointwise_size(seed in 0u64..500, shrink in 0.0f64..1.0, lo in 1.0f64..3.0, amp in 0.0f64..1.5) {
        let (f, p) = (sample_field(seed), variable_p(lo, amp));
        let smaller = SampledField::new(f.grid, f.values.iter().enumerate().map(|(i, v)| v * if i % 3 == 0 { shrink } else { 1.0 }).collect()).unwrap();
        let tol = 1e-10;
        prop_assert!(luxemburg_norm(&smaller, &p, tol).unwrap() <= luxemburg_norm(&f, &p, tol).unwrap() * (1.0 + tol));
    }

    #[test]
    fn inner_lq_is_monotone_in_q(a in proptest::collection::vec(0.0f64..10.0, 1..8), q0 in 0.5f64..4.0, dq in 0.0f64..4.0) {
        let levels: Vec<Vec<f64>> = a.iter().map(|v| vec![*v]).collect();
        let small = inner_lq(&levels, &[q0], &[0.0])[0];
        let large = inner_lq(&levels, &[q0 + dq], &[0.0])[0];
        prop_assert!(large <= small * (1.0 + 1e-14) + 1e-300);
    }
}
