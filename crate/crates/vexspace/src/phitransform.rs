//! Admissible pairs built from a squared-profile telescope, the
//! Littlewood-Paley ladder, the φ-transform and its inverse.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lebesgue::Ladder;
use crate::sampling::{corner_index, cubes_at_level, CoeffSeq, Grid, SampledField};
use crate::{Error, Result};

/// Radial step profiles: `u = 1` on `[0,1]`, `u = 0` on `[2,∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    #[serde(rename = "smoothstep-exp")]
    SmoothstepExp,
    #[serde(rename = "smoothstep-poly")]
    SmoothstepPoly,
}

impl Profile {
    pub fn id(&self) -> &'static str {
        match self {
            Profile::SmoothstepExp => "smoothstep-exp",
            Profile::SmoothstepPoly => "smoothstep-poly",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "smoothstep-exp" => Ok(Profile::SmoothstepExp),
            "smoothstep-poly" => Ok(Profile::SmoothstepPoly),
            _ => Err(Error::InvalidParameter(format!("unknown profile {id:?}"))),
        }
    }

    pub fn u(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= 2.0 {
            return 0.0;
        }
        let s = t - 1.0;
        match self {
            Profile::SmoothstepExp => {
                let g = |x: f64| (-1.0 / x).exp();
                let a = g(1.0 - s);
                a / (a + g(s))
            }
            Profile::SmoothstepPoly => 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s)),
        }
    }

    /// `√(u(t) − u(2t))`, the mother annulus multiplier.
    pub fn phi_hat(&self, t: f64) -> f64 {
        (self.u(t) - self.u(2.0 * t)).max(0.0).sqrt()
    }
}

/// `(φ, Φ)` with dual `ψ = φ, Ψ = Φ`, stored as per-level multipliers on the grid bins.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissiblePair {
    pub grid: Grid,
    pub nu_max: u32,
    pub profile: Profile,
    pub lower_bound_c: f64,
    pub identity_residual: f64,
    multipliers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDescriptor {
    pub profile_id: String,
    pub nu_max: u32,
    pub lower_bound_c: f64,
    pub identity_residual: f64,
}

const DECREASE_SAMPLES: usize = 4096;

pub fn make_admissible_pair(grid: &Grid, nu_max: u32, profile: Profile) -> Result<AdmissiblePair> {
    let top = (nu_max as f64 + 1.0).exp2();
    if top > grid.nyquist() {
        return Err(Error::InvalidParameter(format!(
            "2^(nu_max+1) = {top} exceeds the Nyquist frequency {}",
            grid.nyquist()
        )));
    }
    // strict decrease away from the ramp ends (the exp profile is flat in f64 there),
    // monotone everywhere
    let mut prev = profile.u(1.0);
    for i in 1..=DECREASE_SAMPLES {
        let t = 1.0 + i as f64 / (DECREASE_SAMPLES as f64 + 1.0);
        let v = profile.u(t);
        let interior = (1.05..=1.95).contains(&t);
        if v > prev || (interior && !(v < prev)) {
            return Err(Error::InvalidParameter(format!("profile {} is not strictly decreasing", profile.id())));
        }
        prev = v;
    }
    let c = (1.0 - profile.u(1.2)).sqrt().min(profile.u(5.0 / 3.0).sqrt());

    let norms: Vec<f64> = (0..grid.len()).map(|i| grid.frequency_norm(i)).collect();
    let mut multipliers = Vec::with_capacity(nu_max as usize + 1);
    multipliers.push(norms.iter().map(|&r| profile.u(r).sqrt()).collect::<Vec<_>>());
    for nu in 1..=nu_max {
        let s = (-(nu as f64)).exp2();
        multipliers.push(norms.iter().map(|&r| profile.phi_hat(s * r)).collect());
    }

    // support and lower bounds of the mother functions, on a fine radial sample
    for i in 0..=2000 {
        let t = 2.5 * i as f64 / 2000.0;
        let phi = profile.phi_hat(t);
        let big = profile.u(t).sqrt();
        let bad_support = (!(0.5..=2.0).contains(&t) && phi != 0.0) || (t > 2.0 && big != 0.0);
        let bad_lower = ((0.6..=5.0 / 3.0).contains(&t) && phi < c * (1.0 - 1e-12))
            || (t <= 5.0 / 3.0 && big < c * (1.0 - 1e-12));
        if bad_support || bad_lower {
            return Err(Error::InvalidParameter(format!("profile {} fails the pair conditions at {t}", profile.id())));
        }
    }

    let band = (nu_max as f64).exp2();
    let mut residual = 0.0f64;
    for (i, &r) in norms.iter().enumerate() {
        if r <= band {
            let s: f64 = multipliers.iter().map(|m| m[i] * m[i]).sum();
            residual = residual.max((s - 1.0).abs());
        }
    }
    if residual > 1e-14 {
        return Err(Error::InvalidParameter(format!("partition identity residual {residual:e}")));
    }
    Ok(AdmissiblePair { grid: *grid, nu_max, profile, lower_bound_c: c, identity_residual: residual, multipliers })
}

impl AdmissiblePair {
    /// Multiplier of level `ν` at grid bin `i` (`Φ̂` for `ν = 0`).
    pub fn multiplier(&self, nu: u32, i: usize) -> f64 {
        self.multipliers[nu as usize][i]
    }

    /// The multiplier of level `ν` at an arbitrary radius.
    pub fn level_hat(&self, nu: u32, r: f64) -> f64 {
        if nu == 0 {
            self.profile.u(r).sqrt()
        } else {
            self.profile.phi_hat((-(nu as f64)).exp2() * r)
        }
    }

    pub fn descriptor(&self) -> PairDescriptor {
        PairDescriptor {
            profile_id: self.profile.id().into(),
            nu_max: self.nu_max,
            lower_bound_c: self.lower_bound_c,
            identity_residual: self.identity_residual,
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if *grid != self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }
}

/// Levels `φ_ν ∗ f` for `ν = 0..=ν_max`.
pub fn ladder(f: &SampledField, pair: &AdmissiblePair) -> Result<Ladder> {
    pair.check(&f.grid)?;
    let spec = f.spectrum();
    let levels = (0..=pair.nu_max)
        .into_par_iter()
        .map(|nu| {
            let m = &pair.multipliers[nu as usize];
            let s: Vec<Complex64> = spec.iter().zip(m).map(|(v, w)| v * w).collect();
            SampledField::from_spectrum(f.grid, s).expect("length preserved")
        })
        .collect();
    Ladder::new(f.grid, levels)
}

/// `s_Q = |Q|^{1/2} (φ̃_ν ∗ f)(x_Q)` for all cubes of levels `0..=ν_max`.
pub fn analyze(f: &SampledField, pair: &AdmissiblePair) -> Result<CoeffSeq> {
    let lad = ladder(f, pair)?;
    let dim = f.grid.dim();
    let mut out = CoeffSeq::new(pair.nu_max);
    for (nu, level) in lad.levels.iter().enumerate() {
        for q in cubes_at_level(&f.grid, nu as u32)? {
            let i = corner_index(&f.grid, &q)?;
            out.insert(q, level.values[i] * q.volume(dim).sqrt());
        }
    }
    Ok(out)
}

/// `Σ_Q s_Q ψ_Q` evaluated on the grid, level by level in frequency.
pub fn synthesize(s: &CoeffSeq, pair: &AdmissiblePair) -> Result<SampledField> {
    let grid = pair.grid;
    let dim = grid.dim();
    let cell = grid.cell_volume();
    let top = s.nu_max.min(pair.nu_max);
    if s.entries.keys().any(|q| q.level > pair.nu_max) {
        return Err(Error::InvalidParameter("coefficient level above the pair's nu_max".into()));
    }
    let parts: Vec<Vec<Complex64>> = (0..=top)
        .into_par_iter()
        .map(|nu| -> Result<Vec<Complex64>> {
            let mut imp = SampledField::zeros(grid);
            let mut any = false;
            for (q, v) in s.level(nu) {
                let i = corner_index(&grid, q)?;
                imp.values[i] += v * (q.volume(dim).sqrt() / cell);
                any = true;
            }
            if !any {
                return Ok(vec![]);
            }
            let m = &pair.multipliers[nu as usize];
            let spec: Vec<Complex64> = imp.spectrum().iter().zip(m).map(|(v, w)| v * w).collect();
            Ok(SampledField::from_spectrum(grid, spec)?.values)
        })
        .collect::<Result<_>>()?;
    let mut out = SampledField::zeros(grid);
    for p in parts.into_iter().filter(|p| !p.is_empty()) {
        for (o, v) in out.values.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// `B^σ f = F^{-1} (1+|ξ|²)^{-σ/2} F f`.
pub fn bessel_potential(f: &SampledField, sigma: f64) -> SampledField {
    if sigma == 0.0 {
        return f.clone();
    }
    f.apply_radial(|r| (1.0 + r * r).powf(-sigma / 2.0))
}

/// `Σ_Q s_Q conj(t_Q)`.
pub fn sequence_inner(s: &CoeffSeq, t: &CoeffSeq) -> Complex64 {
    s.entries.iter().map(|(q, v)| v * t.get(q).conj()).sum()
}
