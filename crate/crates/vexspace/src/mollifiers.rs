//! The kernels `η_{ν,m}(x) = 2^{nν}(1+2^ν|x|)^{-m}`, the centred maximal
//! operator and numerical checks of the kernel lemmas.
//!
//! Kernels are periodised over the lattice `2L·ℤⁿ`. A few shells are summed
//! directly; the rest of the lattice sum is evaluated analytically (Hurwitz
//! zeta tails in 1D; in 2D a binomial expansion of the remote part of each
//! row and Poisson summation for remote rows), so the periodisation error is
//! at the level of rounding.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exponents::{ExponentField, Role};
use crate::lebesgue::{inner_lq, luxemburg_abs, mixed_norm, Ladder};
use crate::molecules::trig_moments;
pub use crate::sampling::CoeffSeq;
use crate::sampling::{convolve, cube_points, cubes_at_level, level_layout, DyadicCube, Grid, SampledField};
use crate::special::{binom, hurwitz_zeta, line_integral_constant};
use crate::{Error, Result};

/// `η_{ν,m}` on `ℝⁿ` (not periodised).
pub fn eta_free(dim: usize, nu: u32, m: f64, r: f64) -> f64 {
    let a = (nu as f64).exp2();
    a.powi(dim as i32) * (1.0 + a * r).powf(-m)
}

/// `∫_{ℝⁿ} η_{ν,m}`, independent of `ν`.
pub fn eta_mass(dim: usize, m: f64) -> f64 {
    if dim == 1 {
        2.0 / (m - 1.0)
    } else {
        2.0 * std::f64::consts::PI / ((m - 1.0) * (m - 2.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaKernel {
    pub nu: u32,
    pub m: f64,
    pub periodized: SampledField,
}

impl EtaKernel {
    /// Kernel value at the grid offset `a − b`.
    pub fn at_offset(&self, a: usize, b: usize) -> f64 {
        self.periodized.values[self.periodized.grid.difference_index(a, b)].re
    }
}

struct Periodizer1d {
    a: f64,
    m: f64,
    l: f64,
}

impl Periodizer1d {
    fn value(&self, x: f64) -> f64 {
        let (a, m, l) = (self.a, self.m, self.l);
        let f = |y: f64| a * (1.0 + a * y.abs()).powf(-m);
        let mut s = f(x) + f(x - 2.0 * l) + f(x + 2.0 * l);
        let c = a * (2.0 * l * a).powf(-m);
        let d = 2.0 * l * a;
        s += c * (hurwitz_zeta(m, 2.0 + (1.0 - a * x) / d) + hurwitz_zeta(m, 2.0 + (1.0 + a * x) / d));
        s
    }
}

const K_TERMS: usize = 40;
const L_TERMS: usize = 16;

struct Periodizer2d {
    a: f64,
    m: f64,
    l: f64,
    j1: i64,
    j2: i64,
    /// `C(−m,k) a^{2−m−k}` for the binomial expansion in `1/(a r)`.
    ck: Vec<f64>,
}

impl Periodizer2d {
    fn new(a: f64, m: f64, l: f64) -> Self {
        let j2 = 6i64.max(((4.0 / (a * l) - 1.0) / 2.0).ceil() as i64);
        let j1 = 4 * j2 + 2;
        let ck = (0..K_TERMS).map(|k| binom(-m, k) * a.powf(2.0 - m - k as f64)).collect();
        Self { a, m, l, j1, j2, ck }
    }

    /// `ζ(m+e, J1+1 ∓ x0/2L)` summed over both signs, `e = 0..K+2L`.
    fn row_table(&self, x0: f64) -> Vec<f64> {
        let q1 = (self.j1 + 1) as f64 - x0 / (2.0 * self.l);
        let q2 = (self.j1 + 1) as f64 + x0 / (2.0 * self.l);
        (0..K_TERMS + 2 * L_TERMS)
            .map(|e| {
                let t = self.m + e as f64;
                (hurwitz_zeta(t, q1) + hurwitz_zeta(t, q2)) * (2.0 * self.l).powf(-t)
            })
            .collect()
    }

    /// Contribution of rows `|j2| > J2`, a function of `x1` only.
    fn far_rows(&self, x1: f64) -> f64 {
        let l2 = 2.0 * self.l;
        let q1 = (self.j2 + 1) as f64 - x1 / l2;
        let q2 = (self.j2 + 1) as f64 + x1 / l2;
        let mut s = 0.0;
        for (k, c) in self.ck.iter().enumerate() {
            let t = self.m + k as f64;
            let z = (hurwitz_zeta(t - 1.0, q1) + hurwitz_zeta(t - 1.0, q2)) * l2.powf(1.0 - t);
            let term = c * line_integral_constant(t) * z / l2;
            s += term;
            if term.abs() < 1e-19 * s.abs() {
                break;
            }
        }
        s
    }

    fn row_tail(&self, d: f64, table: &[f64]) -> f64 {
        let u_min = self.l * (2 * self.j1 + 1) as f64;
        let mut s = 0.0;
        for (k, c) in self.ck.iter().enumerate() {
            let mut inner = 0.0;
            let tk = self.m + k as f64;
            let mut d2l = 1.0;
            for l in 0..L_TERMS {
                let b = binom(-tk / 2.0, l);
                let term = b * d2l * table[k + 2 * l];
                inner += term;
                if (b * (d / u_min).powi(2 * l as i32)).abs() < 1e-18 {
                    break;
                }
                d2l *= d * d;
            }
            s += c * inner;
            if (c * (self.a * u_min).powf(-(k as f64))).abs() < 1e-18 * self.ck[0].abs() {
                break;
            }
        }
        s
    }

    fn value(&self, x0: f64, x1: f64, table: &[f64], far: f64) -> f64 {
        let (a, m, l2) = (self.a, self.m, 2.0 * self.l);
        let mut s = far;
        for j2 in -self.j2..=self.j2 {
            let d = (x1 - l2 * j2 as f64).abs();
            for j1 in -self.j1..=self.j1 {
                let u = x0 - l2 * j1 as f64;
                s += a * a * (1.0 + a * (u * u + d * d).sqrt()).powf(-m);
            }
            s += self.row_tail(d, table);
        }
        s
    }
}

/// Periodised `η_{ν,m}` at an arbitrary point of the torus.
pub fn eta_periodized_at(grid: &Grid, nu: u32, m: f64, x: [f64; 2]) -> f64 {
    let a = (nu as f64).exp2();
    let l = grid.half_length();
    if grid.dim() == 1 {
        Periodizer1d { a, m, l }.value(grid.wrap(x[0]))
    } else {
        let p = Periodizer2d::new(a, m, l);
        let x0 = grid.wrap(x[0]);
        let x1 = grid.wrap(x[1]);
        p.value(x0, x1, &p.row_table(x0), p.far_rows(x1))
    }
}

fn build_eta(grid: &Grid, nu: u32, m: f64) -> EtaKernel {
    let a = (nu as f64).exp2();
    let l = grid.half_length();
    let values: Vec<Complex64> = if grid.dim() == 1 {
        let p = Periodizer1d { a, m, l };
        (0..grid.len())
            .into_par_iter()
            .map(|i| Complex64::new(p.value(grid.wrap(grid.coords(i)[0])), 0.0))
            .collect()
    } else {
        let p = Periodizer2d::new(a, m, l);
        let n = grid.n();
        let h = grid.spacing();
        let fars: Vec<f64> = (0..n).map(|i1| p.far_rows(grid.wrap(i1 as f64 * h))).collect();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i0| {
                let x0 = grid.wrap(i0 as f64 * h);
                let table = p.row_table(x0);
                (0..n)
                    .map(|i1| Complex64::new(p.value(x0, grid.wrap(i1 as f64 * h), &table, fars[i1]), 0.0))
                    .collect()
            })
            .collect();
        rows.into_iter().flatten().collect()
    };
    EtaKernel { nu, m, periodized: SampledField { grid: *grid, values } }
}

type CacheKey = (usize, usize, u64, u32, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<EtaKernel>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<EtaKernel>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Periodised kernel on a grid. Requires `m > n`.
pub fn eta(grid: &Grid, nu: u32, m: f64) -> Result<Arc<EtaKernel>> {
    let n = grid.dim() as f64;
    if !(m > n) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("eta needs m > n, got m = {m}, n = {n}")));
    }
    let key = (grid.dim(), grid.n(), grid.half_length().to_bits(), nu, m.to_bits());
    if let Some(k) = cache().lock().expect("eta cache").get(&key) {
        return Ok(k.clone());
    }
    let k = Arc::new(build_eta(grid, nu, m));
    let mut c = cache().lock().expect("eta cache");
    if c.len() > 512 {
        c.clear();
    }
    c.insert(key, k.clone());
    Ok(k)
}

/// Half-sides of the centred cubes, in grid steps: the point cell (`0`),
/// then `2^j` for `h·2^j ≤ L`.
pub fn maximal_radii(grid: &Grid) -> Vec<usize> {
    let mut r = vec![0];
    let mut s = 1;
    while s <= grid.n() / 2 {
        r.push(s);
        s *= 2;
    }
    r
}

/// Trapezoid-weighted window sums along one axis: weight 1 for `|t| < r`, ½ at `|t| = r`.
fn window_axis(grid: &Grid, data: &[f64], r: usize, axis: usize) -> Vec<f64> {
    let n = grid.n();
    if r == 0 {
        return data.to_vec();
    }
    let mut out = vec![0.0; data.len()];
    let lines = data.len() / n;
    let mut line = vec![0.0; n];
    let mut pref = vec![0.0; 3 * n + 1];
    for li in 0..lines {
        let idx = |t: usize| -> usize {
            if grid.dim() == 1 {
                t
            } else if axis == 0 {
                t * n + li
            } else {
                li * n + t
            }
        };
        for t in 0..n {
            line[t] = data[idx(t)];
        }
        for t in 0..3 * n {
            pref[t + 1] = pref[t] + line[t % n];
        }
        for t in 0..n {
            let c = t + n;
            let wr = pref[c + r + 1] - pref[c - r];
            let wr1 = pref[c + r] - pref[c + 1 - r];
            out[idx(t)] = 0.5 * (wr + wr1);
        }
    }
    out
}

/// Average of `|f|` over the centred cube with half-side `r·h` (`r = 0` is the point cell).
pub fn centered_average(f_abs: &[f64], grid: &Grid, r: usize) -> Vec<f64> {
    let mut w = window_axis(grid, f_abs, r, 0);
    if grid.dim() == 2 {
        w = window_axis(grid, &w, r, 1);
    }
    if r == 0 {
        return w;
    }
    let vol = (2 * r) as f64;
    let vol = vol.powi(grid.dim() as i32);
    w.iter().map(|v| v / vol).collect()
}

/// Centred maximal function over dyadic cube sizes.
pub fn maximal(f: &SampledField) -> SampledField {
    let grid = f.grid;
    let abs = f.abs();
    let mut best = abs.clone();
    for r in maximal_radii(&grid).into_iter().skip(1) {
        let avg = centered_average(&abs, &grid, r);
        for (b, v) in best.iter_mut().zip(avg) {
            *b = b.max(v);
        }
    }
    SampledField::from_real(grid, &best).expect("length preserved")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub params: serde_json::Value,
    pub measured_constants: Vec<f64>,
    pub pass: bool,
    pub refinement_drift: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `max_i |fine_i / coarse_i − 1|`.
pub fn drift(coarse: &[f64], fine: &[f64]) -> f64 {
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| if *c == 0.0 && *f == 0.0 { 0.0 } else { (f / c - 1.0).abs() })
        .fold(0.0, f64::max)
}

pub const DRIFT_BUDGET: f64 = 0.2;

fn stable(coarse: &[f64], fine: &[f64]) -> (bool, f64) {
    let d = drift(coarse, fine);
    let finite = coarse.iter().chain(fine).all(|c| c.is_finite() && *c > 0.0);
    (finite && d <= DRIFT_BUDGET, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaLemma {
    A1,
    A2,
    A3,
    A4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaLemmaParams {
    pub nu0: u32,
    pub nu1: u32,
    pub m: f64,
    /// Used by A4 only.
    #[serde(default = "one")]
    pub r: f64,
    /// Cube index (level `nu0` for A2, level `nu1` for A4).
    #[serde(default)]
    pub cube: [i64; 2],
}

fn one() -> f64 {
    1.0
}

/// Two one-sided constants `(max a/b, max b/a)` over points where both are positive.
fn two_sided(a: &[f64], b: &[f64]) -> [f64; 2] {
    let mut up = 0.0f64;
    let mut down = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        if *x > 0.0 && *y > 0.0 {
            up = up.max(x / y);
            down = down.max(y / x);
        }
    }
    [up, down]
}

fn lemma_constants(id: EtaLemma, p: &EtaLemmaParams, grid: &Grid) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let n = dim as f64;
    match id {
        EtaLemma::A1 => {
            if p.nu1 < p.nu0 {
                return Err(Error::InvalidParameter("A1 needs nu1 >= nu0".into()));
            }
            let s0 = (-(p.nu0 as f64)).exp2();
            let s1 = (-(p.nu1 as f64)).exp2();
            let h = grid.spacing();
            let reach = (4.0 * s0).max(grid.half_length());
            let steps = (reach / h).ceil() as i64;
            let mut c1 = 0.0f64;
            let mut c2 = 0.0f64;
            let w1 = if dim == 2 { steps } else { 0 };
            for i in -steps..=steps {
                for j in -w1..=w1 {
                    let r = h * ((i * i + j * j) as f64).sqrt();
                    let e0 = eta_free(dim, p.nu0, p.m, r);
                    let e1 = eta_free(dim, p.nu1, p.m, r);
                    if r <= s1 {
                        c1 = c1.max(e0 / e1);
                    }
                    if r >= s0 {
                        c2 = c2.max(e1 / e0);
                    }
                }
            }
            Ok(vec![c1, c2])
        }
        EtaLemma::A2 => {
            let q = DyadicCube::new(p.nu0, p.cube);
            let k = eta(grid, p.nu0, p.m)?;
            let pts = cube_points(grid, &q)?;
            let vol = q.volume(dim);
            let cell = grid.cell_volume();
            let lhs: Vec<f64> = (0..grid.len())
                .into_par_iter()
                .map(|x| pts.iter().map(|&z| k.at_offset(x, z)).sum::<f64>() * cell / vol)
                .collect();
            let mut up = 0.0f64;
            let mut down = 0.0f64;
            for &y in &pts {
                for x in 0..grid.len() {
                    let e = k.at_offset(x, y);
                    up = up.max(lhs[x] / e);
                    down = down.max(e / lhs[x]);
                }
            }
            Ok(vec![up, down])
        }
        EtaLemma::A3 => {
            let k0 = eta(grid, p.nu0, p.m)?;
            let k1 = eta(grid, p.nu1, p.m)?;
            let km = eta(grid, p.nu0.min(p.nu1), p.m)?;
            let c = convolve(&k0.periodized, &k1.periodized)?;
            Ok(two_sided(&c.re(), &km.periodized.re()).to_vec())
        }
        EtaLemma::A4 => {
            if !(p.r > 0.0 && p.r <= 1.0) {
                return Err(Error::InvalidParameter(format!("A4 needs r in (0,1], got {}", p.r)));
            }
            if !(p.m > n / p.r) {
                return Err(Error::InvalidParameter("A4 needs m > n/r".into()));
            }
            let (nu, mu) = (p.nu0, p.nu1);
            let q = DyadicCube::new(mu, p.cube);
            let mut chi = SampledField::zeros(*grid);
            for i in cube_points(grid, &q)? {
                chi.values[i] = Complex64::new(1.0, 0.0);
            }
            let lhs_inner = convolve(&convolve(&eta(grid, nu, p.m)?.periodized, &eta(grid, mu, p.m)?.periodized)?, &chi)?;
            let mr = p.m * p.r;
            let rhs_inner = convolve(&convolve(&eta(grid, nu, mr)?.periodized, &eta(grid, mu, mr)?.periodized)?, &chi)?;
            let w = ((mu as f64 - nu as f64).max(0.0) * n * (1.0 - p.r)).exp2();
            let lhs: Vec<f64> = lhs_inner.values.iter().map(|v| v.re.max(0.0).powf(p.r)).collect();
            let rhs: Vec<f64> = rhs_inner.values.iter().map(|v| w * v.re).collect();
            Ok(two_sided(&lhs, &rhs).to_vec())
        }
    }
}

/// Checks one kernel lemma on `grid` and on its refinement.
///
/// A1 passes iff both one-sided constants are at most `2^m`; A2-A4 pass iff
/// both constants are finite and drift at most 20% under `N → 2N`.
pub fn verify_eta_lemma(id: EtaLemma, params: &EtaLemmaParams, grid: &Grid) -> Result<LemmaReport> {
    let coarse = lemma_constants(id, params, grid)?;
    let fine = lemma_constants(id, params, &grid.refined())?;
    let (ok, d) = stable(&coarse, &fine);
    let pass = match id {
        EtaLemma::A1 => {
            let bound = params.m.exp2();
            coarse.iter().chain(&fine).all(|c| *c <= bound)
        }
        _ => ok,
    };
    Ok(LemmaReport {
        lemma_id: format!("{id:?}"),
        params: serde_json::to_value(params)?,
        measured_constants: coarse,
        pass,
        refinement_drift: d,
        warnings: vec![],
    })
}

/// Largest ratio of `η_{ν,m}∗|g|` to `Σ_{j≤ν} 2^{−j(m−n)} Σ_{Q∈D_{ν−j}} χ_{3Q} M_Q g`.
pub fn eta_vs_m_ratio(nu: u32, m: f64, g: &SampledField) -> Result<f64> {
    let grid = g.grid;
    let dim = grid.dim();
    let n = dim as f64;
    let abs = g.abs();
    let mut absf = SampledField::zeros(grid);
    for (v, a) in absf.values.iter_mut().zip(&abs) {
        *v = Complex64::new(*a, 0.0);
    }
    let lhs = convolve(&absf, &eta(&grid, nu, m)?.periodized)?.re();
    let mut rhs = vec![0.0; grid.len()];
    for j in 0..=nu {
        let level = nu - j;
        let lay = level_layout(&grid, level)?;
        let c = lay.cubes_per_axis as i64;
        let cubes = cubes_at_level(&grid, level)?;
        let mut avg: HashMap<[i64; 2], f64> = HashMap::new();
        for q in &cubes {
            let pts = cube_points(&grid, q)?;
            let s: f64 = pts.iter().map(|&i| abs[i]).sum();
            avg.insert(q.k, s / pts.len() as f64);
        }
        let w = (-(j as f64) * (m - n)).exp2();
        let p = lay.points_per_side;
        for (x, r) in rhs.iter_mut().enumerate() {
            let mi = grid.multi_index(x);
            let k0 = (mi[0] / p) as i64;
            let k1 = (mi[1] / p) as i64;
            let span1: &[i64] = if dim == 2 { &[-1, 0, 1] } else { &[0] };
            let mut s = 0.0;
            for d0 in [-1i64, 0, 1] {
                for &d1 in span1 {
                    let key = [(k0 + d0).rem_euclid(c), if dim == 2 { (k1 + d1).rem_euclid(c) } else { 0 }];
                    s += avg[&key];
                }
            }
            *r += w * s;
        }
    }
    let mut ratio = 0.0f64;
    for (l, r) in lhs.iter().zip(&rhs) {
        if *r > 0.0 {
            ratio = ratio.max(l / r);
        }
    }
    Ok(ratio)
}

/// Compares the kernel-versus-cube-average bound on `g` and its refinement `g_fine`.
pub fn verify_eta_vs_m(nu: u32, m: f64, g: &SampledField, g_fine: &SampledField) -> Result<LemmaReport> {
    if !(m > g.grid.dim() as f64) {
        return Err(Error::InvalidParameter("m must exceed n".into()));
    }
    let c = eta_vs_m_ratio(nu, m, g)?;
    let f = eta_vs_m_ratio(nu, m, g_fine)?;
    let vacuous = g.max_abs() == 0.0;
    let (ok, d) = stable(&[c], &[f]);
    Ok(LemmaReport {
        lemma_id: "eta-vs-maximal".into(),
        params: serde_json::json!({ "nu": nu, "m": m }),
        measured_constants: vec![c],
        pass: vacuous || ok,
        refinement_drift: if vacuous { 0.0 } else { d },
        warnings: vec![],
    })
}

/// `max 2^{ν(α(x)−α(y))} η_{ν,2m}(x−y) / η_{ν,m}(x−y)`; all pairs when there are at most
/// `max_pairs`, otherwise a seeded sample plus near-diagonal pairs.
pub fn weight_swap_constant(alpha: &ExponentField, nu: u32, m: f64, max_pairs: usize, seed: u64) -> Result<f64> {
    let grid = alpha.grid;
    let k2 = eta(&grid, nu, 2.0 * m)?;
    let k1 = eta(&grid, nu, m)?;
    let a = &alpha.samples;
    let nf = nu as f64;
    let ratio = |x: usize, y: usize| -> f64 {
        let d = grid.difference_index(x, y);
        (nf * (a[x] - a[y])).exp2() * k2.periodized.values[d].re / k1.periodized.values[d].re
    };
    let npts = grid.len();
    if npts * npts <= max_pairs {
        return Ok((0..npts)
            .into_par_iter()
            .map(|x| (0..npts).fold(0.0f64, |mx, y| mx.max(ratio(x, y))))
            .reduce(|| 0.0, f64::max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..max_pairs).map(|_| (rng.gen_range(0..npts), rng.gen_range(0..npts))).collect();
    let sampled = pairs.par_iter().map(|&(x, y)| ratio(x, y)).reduce(|| 0.0, f64::max);
    let near = (0..npts)
        .into_par_iter()
        .map(|x| {
            let mi = grid.multi_index(x);
            let n = grid.n() as i64;
            let mut mx = 0.0f64;
            let w1 = if grid.dim() == 2 { 2 } else { 0 };
            for d0 in -2i64..=2 {
                for d1 in -w1..=w1 {
                    let y = grid.flat_index([
                        (mi[0] as i64 + d0).rem_euclid(n) as usize,
                        (mi[1] as i64 + d1).rem_euclid(n) as usize,
                    ]);
                    mx = mx.max(ratio(x, y));
                }
            }
            mx
        })
        .reduce(|| 0.0, f64::max);
    Ok(sampled.max(near))
}

pub const DEFAULT_SWAP_PAIRS: usize = 1 << 21;

/// Weight-swap check on `alpha` and its refinement `alpha_fine`; warns when `m < c_log(α)`.
pub fn verify_weight_swap(alpha: &ExponentField, alpha_fine: &ExponentField, nu: u32, m: f64) -> Result<LemmaReport> {
    let mut warnings = vec![];
    if m < alpha.clog_local {
        warnings.push(format!("m = {m} is below the measured c_log(alpha) = {}", alpha.clog_local));
    }
    let c = weight_swap_constant(alpha, nu, m, DEFAULT_SWAP_PAIRS, 0)?;
    let f = weight_swap_constant(alpha_fine, nu, m, DEFAULT_SWAP_PAIRS, 0)?;
    let (ok, d) = stable(&[c], &[f]);
    Ok(LemmaReport {
        lemma_id: "weight-swap".into(),
        params: serde_json::json!({ "nu": nu, "m": m, "clog_alpha": alpha.clog_local }),
        measured_constants: vec![c],
        pass: ok,
        refinement_drift: d,
        warnings,
    })
}

/// `‖‖η_{ν,m}∗f_ν‖_{l^q}‖_{p} / ‖‖f_ν‖_{l^q}‖_{p}` with `α ≡ 0`; 0 for the zero ladder.
pub fn verify_multiplier(f: &Ladder, p: &ExponentField, q: &ExponentField, m: f64) -> Result<f64> {
    let grid = f.grid;
    if !(p.declared_lower > 1.0 && q.declared_lower > 1.0) {
        return Err(Error::Precondition("multiplier check needs p⁻ > 1 and q⁻ > 1".into()));
    }
    if !(m > grid.dim() as f64) {
        return Err(Error::Precondition("multiplier check needs m > n".into()));
    }
    let zero = ExponentField::constant(grid, 0.0, Role::SmoothnessAlpha)?;
    let den = mixed_norm(f, p, q, &zero)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let mut levels = Vec::with_capacity(f.levels.len());
    for (nu, lv) in f.levels.iter().enumerate() {
        levels.push(convolve(lv, &eta(&grid, nu as u32, m)?.periodized)?);
    }
    let num = mixed_norm(&Ladder::new(grid, levels)?, p, q, &zero)?;
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub q0: f64,
    pub q1: f64,
    pub p0: f64,
    pub ks: Vec<usize>,
    /// `‖‖M f_k‖_{l^{q(x)}}‖_{p0}`.
    pub lhs: Vec<f64>,
    /// `‖‖f_k‖_{l^{q(x)}}‖_{p0}`.
    pub rhs: Vec<f64>,
    /// Least-squares fit of `lhs^{q1}` against `ln K`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line `y ≈ a + b x`; returns `(a, b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (a, b, r2)
}

/// Growth of both sides of the vector-valued maximal inequality for the
/// two-valued exponent `q = q0` on `[0, L)`, `q1` on `[L, 2L)`, with
/// `f_k = k^{−1/q1} χ_{[0,L)}` and `p ≡ p0` (1D grid).
pub fn counterexample_curve(grid: &Grid, q0: f64, q1: f64, p0: f64, ks: &[usize]) -> Result<GrowthCurve> {
    if grid.dim() != 1 {
        return Err(Error::InvalidParameter("the counterexample lives on a 1D grid".into()));
    }
    if !(q1 < q0 && q1 > 1.0) {
        return Err(Error::InvalidParameter(format!("need 1 < q1 < q0, got q0 = {q0}, q1 = {q1}")));
    }
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 {
        return Err(Error::InvalidParameter("ks must be positive and increasing".into()));
    }
    let l = grid.half_length();
    let q: Vec<f64> = (0..grid.len()).map(|i| if grid.coords(i)[0] < l { q0 } else { q1 }).collect();
    let chi: Vec<f64> = (0..grid.len()).map(|i| if grid.coords(i)[0] < l { 1.0 } else { 0.0 }).collect();
    let p: Vec<f64> = vec![p0; grid.len()];
    let cell = grid.cell_volume();
    let mut acc_m = vec![0.0; grid.len()];
    let mut acc_f = vec![0.0; grid.len()];
    let mut lhs = Vec::with_capacity(ks.len());
    let mut rhs = Vec::with_capacity(ks.len());
    let mut next = 0;
    for k in 1..=*ks.last().expect("nonempty") {
        let a = (k as f64).powf(-1.0 / q1);
        let fk: Vec<f64> = chi.iter().map(|c| a * c).collect();
        let mfk = maximal(&SampledField::from_real(*grid, &fk)?).re();
        for i in 0..grid.len() {
            if mfk[i] > 0.0 {
                acc_m[i] += mfk[i].powf(q[i]);
            }
            if fk[i] > 0.0 {
                acc_f[i] += fk[i].powf(q[i]);
            }
        }
        if k == ks[next] {
            let gm: Vec<f64> = acc_m.iter().zip(&q).map(|(s, e)| s.powf(1.0 / e)).collect();
            let gf: Vec<f64> = acc_f.iter().zip(&q).map(|(s, e)| s.powf(1.0 / e)).collect();
            lhs.push(luxemburg_abs(&gm, &p, p0, p0, cell, 1e-12)?);
            rhs.push(luxemburg_abs(&gf, &p, p0, p0, cell, 1e-12)?);
            next += 1;
        }
    }
    let x: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let y: Vec<f64> = lhs.iter().map(|v| v.powf(q1)).collect();
    let (intercept, slope, r_squared) = if ks.len() >= 2 { linear_fit(&x, &y) } else { (y[0], 0.0, 1.0) };
    Ok(GrowthCurve { q0, q1, p0, ks: ks.to_vec(), lhs, rhs, slope, intercept, r_squared })
}

/// Single point `(L(K), R(K))` of the growth curve.
pub fn counterexample_maximal(grid: &Grid, q0: f64, q1: f64, p0: f64, k: usize) -> Result<(f64, f64)> {
    let c = counterexample_curve(grid, q0, q1, p0, &[k])?;
    Ok((c.lhs[0], c.rhs[0]))
}

/// `max |g| / (η_{ν,m}∗|g|^r)^{1/r}` for `g` band-limited to `2^{ν+1}`.
pub fn r_trick_constant(g: &SampledField, r: f64, nu: u32, m: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let band = (nu as f64 + 1.0).exp2();
    let leak = g.out_of_band(band);
    if leak > 1e-10 {
        return Err(Error::BandLimit(format!("relative spectral content {leak:e} above 2^(nu+1)")));
    }
    let grid = g.grid;
    let gr = SampledField::from_real(grid, &g.abs().iter().map(|v| v.powf(r)).collect::<Vec<_>>())?;
    let c = convolve(&gr, &eta(&grid, nu, m)?.periodized)?;
    let mut ratio = 0.0f64;
    for (v, s) in g.values.iter().zip(&c.values) {
        if s.re > 0.0 {
            ratio = ratio.max(v.norm() / s.re.powf(1.0 / r));
        }
    }
    Ok(ratio)
}

pub fn r_trick_check(g: &SampledField, g_fine: &SampledField, r: f64, nu: u32, m: f64) -> Result<LemmaReport> {
    let c = r_trick_constant(g, r, nu, m)?;
    let f = r_trick_constant(g_fine, r, nu, m)?;
    let (ok, d) = stable(&[c], &[f]);
    Ok(LemmaReport {
        lemma_id: "r-trick".into(),
        params: serde_json::json!({ "r": r, "nu": nu, "m": m }),
        measured_constants: vec![c],
        pass: ok,
        refinement_drift: d,
        warnings: vec![],
    })
}

/// Measured constants `[ratio, c_g, c_h]` for `|g∗h| ≤ c 2^{k(ν−μ)} η_{ν,m0}∗η_{μ,m1−k}`,
/// where `c_g`, `c_h` are the smallest constants making the derivative bound on `g`
/// and the decay bound on `h` hold, and `ratio` is the bound's constant after
/// dividing out `c_g·c_h`.
#[allow(clippy::too_many_arguments)]
pub fn vanishing_moment_constants(
    g: &SampledField,
    h: &SampledField,
    k: u32,
    nu: u32,
    mu: u32,
    m0: f64,
    m1: f64,
) -> Result<[f64; 3]> {
    let grid = g.grid;
    if h.grid != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim() as f64;
    if !(m0 > n && m1 > n + k as f64) {
        return Err(Error::InvalidParameter("need m0 > n and m1 > n + k".into()));
    }
    if k >= 1 {
        let center = [0.0, 0.0];
        for mom in trig_moments(h, center, k - 1) {
            if mom.value.norm() > 1e-8 * mom.scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Precondition(format!(
                    "moment {:?} of h is {:e} (scale {:e})",
                    mom.gamma,
                    mom.value.norm(),
                    mom.scale
                )));
            }
        }
    }
    let eg = eta(&grid, nu, m0)?;
    let eh = eta(&grid, mu, m1)?;
    let mut c_h = 0.0f64;
    for (v, e) in h.values.iter().zip(&eh.periodized.values) {
        c_h = c_h.max(v.norm() / e.re);
    }
    let mut c_g = 0.0f64;
    let gammas: Vec<[u32; 2]> = if grid.dim() == 1 {
        (0..=k).map(|a| [a, 0]).collect()
    } else {
        (0..=k).flat_map(|a| (0..=k - a).map(move |b| [a, b])).collect()
    };
    for gm in gammas {
        let d = crate::molecules::spectral_derivative(g, gm);
        let w = (nu as f64 * (gm[0] + gm[1]) as f64).exp2();
        for (v, e) in d.values.iter().zip(&eg.periodized.values) {
            c_g = c_g.max(v.norm() / (w * e.re));
        }
    }
    let lhs = convolve(g, h)?;
    let rhs = convolve(&eg.periodized, &eta(&grid, mu, m1 - k as f64)?.periodized)?;
    let scale = (k as f64 * (nu as f64 - mu as f64)).exp2() * c_g * c_h;
    let mut ratio = 0.0f64;
    for (l, r) in lhs.values.iter().zip(&rhs.values) {
        ratio = ratio.max(l.norm() / (scale * r.re));
    }
    Ok([ratio, c_g, c_h])
}

#[allow(clippy::too_many_arguments)]
pub fn verify_vanishing_moment_bound(
    g: &SampledField,
    h: &SampledField,
    g_fine: &SampledField,
    h_fine: &SampledField,
    k: u32,
    nu: u32,
    mu: u32,
    m0: f64,
    m1: f64,
) -> Result<LemmaReport> {
    let c = vanishing_moment_constants(g, h, k, nu, mu, m0, m1)?;
    let f = vanishing_moment_constants(g_fine, h_fine, k, nu, mu, m0, m1)?;
    let (_, d) = stable(&c, &f);
    let finite = c.iter().all(|v| v.is_finite());
    Ok(LemmaReport {
        lemma_id: "vanishing-moments".into(),
        params: serde_json::json!({ "k": k, "nu": nu, "mu": mu, "m0": m0, "m1": m1 }),
        measured_constants: c.to_vec(),
        pass: finite && d <= DRIFT_BUDGET,
        refinement_drift: d,
        warnings: vec![],
    })
}

/// Magnitude of the pointwise `l^{q}` inner norm, exposed for the counterexample tables.
pub fn lq_profile(levels: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    let zeros = vec![0.0; q.len()];
    inner_lq(levels, q, &zeros)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_formula_at_half() {
        let g = Grid::new(1, 256, 1.0).unwrap();
        let k = eta(&g, 1, 2.0).unwrap();
        let i = 64; // x = 0.5
        let direct = 2.0 * (1.0f64 + 2.0 * 0.5).powi(-2);
        assert!(k.periodized.values[i].re >= direct);
        // the periodisation tail is the only difference
        let tail: f64 = (1..200_000)
            .map(|j: i64| {
                let s = 2.0 * j as f64;
                2.0 * ((1.0f64 + 2.0 * (s - 0.5)).powi(-2) + (1.0f64 + 2.0 * (s + 0.5)).powi(-2))
            })
            .sum();
        assert!((k.periodized.values[i].re - direct - tail).abs() < 1e-5 * tail);
    }

    #[test]
    fn rejects_small_m() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        assert!(eta(&g, 0, 1.0).is_err());
        let g2 = Grid::new(2, 64, 1.0).unwrap();
        assert!(eta(&g2, 0, 2.0).is_err());
    }

    #[test]
    fn maximal_of_constant() {
        let g = Grid::new(2, 64, 1.0).unwrap();
        let f = SampledField::constant(g, Complex64::new(-3.0, 0.0));
        for v in maximal(&f).values {
            assert!((v.re - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
