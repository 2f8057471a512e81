//! Molecule checks, smoothness orders and the `t*_r` coefficient smoothing.
//!
//! Moments are taken against the periodic coordinates
//! `ω_i(x) = (L/π) sin(π(x_i − c_i)/L)`, which agree with `x_i − c_i` to third
//! order near the centre `c` and are trigonometric polynomials, so the grid
//! quadrature of `ω^γ f` is exact. A field whose spectrum vanishes at all
//! wavenumbers `|k_i| ≤ |γ|` has vanishing `ω^γ`-moment.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exponents::ExponentField;
use crate::mollifiers::eta;
use crate::sampling::{corner_index, cubes_at_level, level_layout, CoeffSeq, DyadicCube, Grid, SampledField};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Moment {
    pub gamma: [u32; 2],
    pub value: Complex64,
    /// `∫ |ω^γ f|`, the natural size of the moment.
    pub scale: f64,
}

fn multi_indices(dim: usize, order: u32) -> Vec<[u32; 2]> {
    if dim == 1 {
        (0..=order).map(|a| [a, 0]).collect()
    } else {
        (0..=order).flat_map(|a| (0..=order - a).map(move |b| [a, b])).collect()
    }
}

/// All moments `∫ ω(x)^γ f(x) dx` with `|γ| ≤ order` about `center`.
pub fn trig_moments(f: &SampledField, center: [f64; 2], order: u32) -> Vec<Moment> {
    let g = f.grid;
    let l = g.half_length();
    let c = std::f64::consts::PI / l;
    let omegas: Vec<[f64; 2]> = (0..g.len())
        .map(|i| {
            let x = g.coords(i);
            [(c * (x[0] - center[0])).sin() / c, (c * (x[1] - center[1])).sin() / c]
        })
        .collect();
    let cell = g.cell_volume();
    multi_indices(g.dim(), order)
        .into_iter()
        .map(|gamma| {
            let mut value = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for (w, v) in omegas.iter().zip(&f.values) {
                let p = w[0].powi(gamma[0] as i32) * w[1].powi(gamma[1] as i32);
                value += v * p;
                scale += (v * p).norm();
            }
            Moment { gamma, value: value * cell, scale: scale * cell }
        })
        .collect()
}

/// `D^γ f` by the multiplier `(iξ)^γ`.
pub fn spectral_derivative(f: &SampledField, gamma: [u32; 2]) -> SampledField {
    if gamma == [0, 0] {
        return f.clone();
    }
    let i = Complex64::new(0.0, 1.0);
    f.apply_multiplier(|xi| (i * xi[0]).powu(gamma[0]) * (i * xi[1]).powu(gamma[1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    /// Moment order.
    pub k: u32,
    /// Derivative order.
    pub l: u32,
    /// Decay order.
    pub big_m: f64,
    /// Decay actually tested, `m > M`.
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeReport {
    pub level: u32,
    pub moments_checked: bool,
    pub max_moment: f64,
    pub moment_scale: f64,
    pub decay_ratio: f64,
    pub family_constant: f64,
    pub moments_pass: bool,
    pub decay_pass: bool,
    pub pass: bool,
}

/// Checks the moment and decay conditions of `m_Q` for the cube `Q`.
///
/// `family_constant` is the constant allowed in the decay comparison when a
/// whole family is checked up to a constant; use 1 for the strict condition.
pub fn is_molecule(mq: &SampledField, q: &DyadicCube, spec: &MoleculeSpec, family_constant: f64) -> Result<MoleculeReport> {
    let grid = mq.grid;
    let dim = grid.dim();
    if !(spec.m > spec.big_m) {
        return Err(Error::InvalidParameter(format!("need m > M, got m = {}, M = {}", spec.m, spec.big_m)));
    }
    if !(spec.big_m > dim as f64) {
        return Err(Error::InvalidParameter("need M > n".into()));
    }
    if !(family_constant >= 1.0) {
        return Err(Error::InvalidParameter("family constant must be at least 1".into()));
    }
    let nu = q.level;
    let (mut max_moment, mut moment_scale) = (0.0f64, 0.0f64);
    let moments_checked = nu > 0;
    if moments_checked {
        let c = q.center(dim);
        for mom in trig_moments(mq, c, spec.k) {
            let rel = mom.value.norm() / mom.scale.max(f64::MIN_POSITIVE);
            if rel >= max_moment / moment_scale.max(f64::MIN_POSITIVE) {
                max_moment = mom.value.norm();
                moment_scale = mom.scale;
            }
        }
    }
    let moments_pass = !moments_checked || max_moment <= 1e-8 * moment_scale;

    let kern = eta(&grid, nu, spec.m)?;
    let xq = corner_index(&grid, q)?;
    let sq = q.volume(dim).sqrt();
    let mut decay_ratio = 0.0f64;
    for gamma in multi_indices(dim, spec.l) {
        let d = spectral_derivative(mq, gamma);
        let w = (nu as f64 * (gamma[0] + gamma[1]) as f64).exp2() * sq;
        for (x, v) in d.values.iter().enumerate() {
            decay_ratio = decay_ratio.max(v.norm() / (w * kern.at_offset(x, xq)));
        }
    }
    let decay_pass = decay_ratio <= (1.0 + 1e-6) * family_constant;
    Ok(MoleculeReport {
        level: nu,
        moments_checked,
        max_moment,
        moment_scale,
        decay_ratio,
        family_constant,
        moments_pass,
        decay_pass,
        pass: moments_pass && decay_pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    /// `N(x) = n/min{1,p(x),q(x)} − n − α(x)`.
    pub n_field: SampledField,
    /// `sup N + ε`.
    pub k: f64,
    /// `sup α + 1 + ε`.
    pub l: f64,
}

impl Thresholds {
    /// Integer orders `(⌊K⌋, ⌊L⌋)`.
    pub fn floor_orders(&self) -> (i64, i64) {
        (self.k.floor() as i64, self.l.floor() as i64)
    }
}

pub fn smoothness_thresholds(p: &ExponentField, q: &ExponentField, alpha: &ExponentField, eps: f64) -> Result<Thresholds> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if p.grid != q.grid || p.grid != alpha.grid {
        return Err(Error::GridMismatch);
    }
    let n = p.dim() as f64;
    let vals: Vec<f64> = (0..p.grid.len())
        .map(|i| n / 1f64.min(p.samples[i]).min(q.samples[i]) - n - alpha.samples[i])
        .collect();
    let sup = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Thresholds {
        n_field: SampledField::from_real(p.grid, &vals)?,
        k: sup + eps,
        l: alpha.max() + 1.0 + eps,
    })
}

/// `(t*_r)_Q = (Σ_{P∈D_ν} |t_P|^r / (1+2^ν|x_P−x_Q|)^m)^{1/r}` with torus distances.
///
/// Every cube of each level carrying a coefficient gets an entry.
pub fn t_star(t: &CoeffSeq, r: f64, m: f64, grid: &Grid) -> Result<CoeffSeq> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    if !(m > grid.dim() as f64) {
        return Err(Error::InvalidParameter("m must exceed n".into()));
    }
    let dim = grid.dim();
    let mut out = CoeffSeq::new(t.nu_max);
    for nu in 0..=t.nu_max {
        let src: Vec<(DyadicCube, f64)> = t.level(nu).map(|(q, v)| (*q, v.norm().powf(r))).collect();
        if src.is_empty() {
            continue;
        }
        let c = level_layout(grid, nu)?.cubes_per_axis as i64;
        let side = (-(nu as f64)).exp2();
        let a = (nu as f64).exp2();
        let wrapped = |d: i64| -> f64 {
            let d = d.rem_euclid(c);
            d.min(c - d) as f64 * side
        };
        let weight: Vec<f64> = (0..c * c)
            .map(|idx| {
                let (d0, d1) = (idx / c, idx % c);
                let dist = wrapped(d0).hypot(if dim == 2 { wrapped(d1) } else { 0.0 });
                (1.0 + a * dist).powf(-m)
            })
            .collect();
        let targets = cubes_at_level(grid, nu)?;
        let vals: Vec<f64> = targets
            .par_iter()
            .map(|q| {
                let s: f64 = src
                    .iter()
                    .map(|(p, w)| {
                        let d0 = (q.k[0] - p.k[0]).rem_euclid(c);
                        let d1 = if dim == 2 { (q.k[1] - p.k[1]).rem_euclid(c) } else { 0 };
                        w * weight[(d0 * c + d1) as usize]
                    })
                    .sum();
                s.powf(1.0 / r)
            })
            .collect();
        for (q, v) in targets.into_iter().zip(vals) {
            out.insert(q, Complex64::new(v, 0.0));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CoeffLine {
    nu: u32,
    k_vector: Vec<i64>,
    re: f64,
    im: f64,
}

/// One JSON object per line: `{"nu", "k_vector", "re", "im"}`.
pub fn write_coeffs<W: Write>(mut w: W, s: &CoeffSeq, dim: usize) -> Result<()> {
    for (q, v) in &s.entries {
        let line = CoeffLine { nu: q.level, k_vector: q.k[..dim].to_vec(), re: v.re, im: v.im };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_coeffs<R: BufRead>(r: R) -> Result<CoeffSeq> {
    let mut out = CoeffSeq::new(0);
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: CoeffLine = serde_json::from_str(&line)?;
        let k = match c.k_vector.as_slice() {
            [a] => [*a, 0],
            [a, b] => [*a, *b],
            _ => return Err(Error::Format(format!("k_vector of length {}", c.k_vector.len()))),
        };
        out.nu_max = out.nu_max.max(c.nu);
        out.insert(DyadicCube::new(c.nu, k), Complex64::new(c.re, c.im));
    }
    Ok(out)
}
