//! Seeded test fields, closed-form exponent families, suite configuration and reports.

mod suites;

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exponents::{ExponentField, Role};
use crate::sampling::{Grid, SampledField};
use crate::tlspaces::hex;
use crate::{Error, Result};

pub use suites::SUITES;

/// Closed-form exponent families. Bounds are known analytically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    /// `base + amplitude·sin(π·frequency·x_axis + phase)`.
    Sine {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + amplitude·sin²(π·frequency·x_axis)`.
    SineSquared {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `low` outside `[start, end)` and `high` inside, with tanh ramps of width `width`.
    SmoothStep {
        low: f64,
        high: f64,
        start: f64,
        end: f64,
        width: f64,
        #[serde(default)]
        axis: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl ExponentSpec {
    pub fn constant(value: f64) -> Self {
        ExponentSpec::Constant { value }
    }

    pub fn sine(base: f64, amplitude: f64) -> Self {
        ExponentSpec::Sine { base, amplitude, frequency: 1.0, phase: 0.0, axis: 0 }
    }

    pub fn cosine(base: f64, amplitude: f64) -> Self {
        ExponentSpec::Sine { base, amplitude, frequency: 1.0, phase: std::f64::consts::FRAC_PI_2, axis: 0 }
    }

    pub fn eval(&self, x: [f64; 2], grid: &Grid) -> f64 {
        use std::f64::consts::PI;
        match *self {
            ExponentSpec::Constant { value } => value,
            ExponentSpec::Sine { base, amplitude, frequency, phase, axis } => {
                base + amplitude * (PI * frequency * x[axis] + phase).sin()
            }
            ExponentSpec::SineSquared { base, amplitude, frequency, axis } => {
                base + amplitude * (PI * frequency * x[axis]).sin().powi(2)
            }
            ExponentSpec::SmoothStep { low, high, start, end, width, axis } => {
                let p = grid.period();
                let mut s = 0.0;
                for j in -1..=1 {
                    let t = x[axis] + j as f64 * p;
                    s += 0.5 * (((t - start) / width).tanh() - ((t - end) / width).tanh());
                }
                low + (high - low) * s.clamp(0.0, 1.0)
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ExponentSpec::Constant { value } => (value, value),
            ExponentSpec::Sine { base, amplitude, .. } => (base - amplitude.abs(), base + amplitude.abs()),
            ExponentSpec::SineSquared { base, amplitude, .. } => (base + amplitude.min(0.0), base + amplitude.max(0.0)),
            ExponentSpec::SmoothStep { low, high, .. } => (low.min(high), low.max(high)),
        }
    }

    pub fn sample(&self, grid: &Grid, role: Role) -> Result<ExponentField> {
        if let ExponentSpec::Sine { axis, .. } | ExponentSpec::SineSquared { axis, .. } | ExponentSpec::SmoothStep { axis, .. } =
            *self
        {
            if axis >= grid.dim() {
                return Err(Error::InvalidParameter(format!("axis {axis} on a {}D grid", grid.dim())));
            }
        }
        let (lo, hi) = self.bounds();
        ExponentField::from_fn(*grid, |x| self.eval(x, grid), lo, hi, role)
    }
}

/// The integer wavevectors with `|ξ| ≤ band`, in an order that does not depend on `N`.
fn band_wavevectors(grid: &Grid, band: f64) -> Vec<[i64; 2]> {
    let unit = std::f64::consts::PI / grid.half_length();
    let kmax = (band / unit).floor() as i64;
    let inside = |k: [i64; 2]| unit * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() <= band;
    let mut out = Vec::new();
    if grid.dim() == 1 {
        for k in 0..=kmax {
            out.push([k, 0]);
        }
    } else {
        for k0 in 0..=kmax {
            for k1 in -kmax..=kmax {
                if (k0 > 0 || k1 >= 0) && inside([k0, k1]) {
                    out.push([k0, k1]);
                }
            }
        }
    }
    out
}

/// Fourier coefficients `c_k` of a seeded real trigonometric polynomial with
/// `|πk/L| ≤ band_limit`, normalised to unit `L²` norm.
pub fn generate_coefficients(grid: &Grid, band_limit: f64, seed: u64) -> Result<Vec<([i64; 2], Complex64)>> {
    if !(band_limit >= 0.0) || band_limit >= grid.nyquist() {
        return Err(Error::BandLimit(format!("band {band_limit} must lie below the Nyquist frequency {}", grid.nyquist())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut reps = Vec::new();
    for k in band_wavevectors(grid, band_limit) {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let c = if k == [0, 0] { Complex64::new(re, 0.0) } else { Complex64::new(re, im) };
        reps.push((k, c));
    }
    let mut all = Vec::with_capacity(2 * reps.len());
    for (k, c) in reps {
        all.push((k, c));
        if k != [0, 0] {
            all.push(([-k[0], -k[1]], c.conj()));
        }
    }
    let energy: f64 = all.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>() * grid.volume();
    if energy == 0.0 {
        return Err(Error::BandLimit("empty band".into()));
    }
    let s = 1.0 / energy.sqrt();
    Ok(all.into_iter().map(|(k, c)| (k, c * s)).collect())
}

/// Deterministic real field, band-limited to `|ξ| ≤ band_limit`, unit `L²` norm.
///
/// The same seed gives samples of the same function at every resolution.
pub fn generate_field(grid: &Grid, band_limit: f64, seed: u64) -> Result<SampledField> {
    let coeffs = generate_coefficients(grid, band_limit, seed)?;
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let scale = grid.len() as f64;
    for (k, c) in coeffs {
        let i = if grid.dim() == 1 { grid.bin(k[0]) } else { grid.flat_index([grid.bin(k[0]), grid.bin(k[1])]) };
        spec[i] = c * scale;
    }
    let f = SampledField::from_spectrum(*grid, spec)?;
    Ok(f.map(|v| Complex64::new(v.re, 0.0)))
}

/// Suite configuration. Missing keys take the suite's reference defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: String,
    pub dim: usize,
    pub n: usize,
    pub half_length: f64,
    pub nu_max: u32,
    pub seed: u64,
    pub fields: usize,
    pub p: ExponentSpec,
    pub q: ExponentSpec,
    pub alpha: ExponentSpec,
    pub tolerances: Tolerances,
    /// Suite-specific settings.
    #[serde(default)]
    pub extra: serde_json::Value,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub luxemburg_rel: f64,
    pub roundtrip_rel: f64,
    pub parseval_rel: f64,
    pub drift: f64,
    pub equivalence_c: f64,
    pub littlewood_paley_c: f64,
    pub lifting_c: f64,
    pub embedding: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            luxemburg_rel: 1e-6,
            roundtrip_rel: 1e-8,
            parseval_rel: 1e-12,
            drift: 0.2,
            equivalence_c: 8.0,
            littlewood_paley_c: 16.0,
            lifting_c: 8.0,
            embedding: 1e-10,
        }
    }
}

impl SuiteConfig {
    /// Reference desk configuration for a suite.
    pub fn defaults(suite: &str) -> Result<Self> {
        if !SUITES.contains(&suite) {
            return Err(Error::UnknownSuite(suite.into()));
        }
        let two_d = suite == "trace";
        let mut c = SuiteConfig {
            suite: suite.into(),
            dim: if two_d { 2 } else { 1 },
            n: if two_d { 128 } else { 1024 },
            half_length: 1.0,
            nu_max: if two_d { 4 } else { 6 },
            seed: 1,
            fields: 20,
            p: ExponentSpec::sine(2.0, 0.5),
            q: ExponentSpec::cosine(2.0, 0.5),
            alpha: ExponentSpec::SineSquared { base: 0.25, amplitude: 0.5, frequency: 1.0, axis: 0 },
            tolerances: Tolerances::default(),
            extra: serde_json::Value::Null,
            output: None,
        };
        match suite {
            "trace" => {
                c.p = ExponentSpec::constant(2.0);
                c.q = ExponentSpec::constant(2.0);
                c.alpha = ExponentSpec::SineSquared { base: 1.0, amplitude: 0.25, frequency: 1.0, axis: 0 };
                c.fields = 10;
            }
            "embedding" => c.fields = 10,
            "multiplier" => c.fields = 100,
            "counterexample" => {
                c.p = ExponentSpec::constant(2.0);
                c.fields = 0;
            }
            _ => {}
        }
        Ok(c)
    }

    /// Parses a JSON config, filling absent keys from [`SuiteConfig::defaults`].
    pub fn from_json(text: &str, suite_override: Option<&str>) -> Result<Self> {
        let mut user: serde_json::Value = if text.trim().is_empty() { serde_json::json!({}) } else { serde_json::from_str(text)? };
        if let Some(s) = suite_override {
            user["suite"] = serde_json::Value::String(s.into());
        }
        let suite = user
            .get("suite")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::InvalidParameter("config has no suite id".into()))?
            .to_string();
        let mut base = serde_json::to_value(Self::defaults(&suite)?)?;
        merge(&mut base, user);
        let c: SuiteConfig = serde_json::from_value(base)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>, suite_override: Option<&str>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, suite_override)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::UnknownSuite(self.suite.clone()));
        }
        let t = &self.tolerances;
        let all = [
            t.luxemburg_rel,
            t.roundtrip_rel,
            t.parseval_rel,
            t.drift,
            t.equivalence_c,
            t.littlewood_paley_c,
            t.lifting_c,
            t.embedding,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Grid::new(self.dim, self.n, self.half_length)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.half_length)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let s = serde_json::to_string(self).expect("config serialises");
        hex(&Sha256::digest(s.as_bytes()))
    }

    pub(crate) fn extra_f64(&self, key: &str, default: f64) -> f64 {
        self.extra.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
    }

    pub(crate) fn extra_list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        self.extra
            .get(key)
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
            .unwrap_or_else(|| default.to_vec())
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub id: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

/// Versioned suite report. Wall-clock timings are kept out of it so that
/// identical configs give identical bytes; see [`Timing`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub config_digest: String,
    pub config: SuiteConfig,
    pub checks: Vec<CheckEntry>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub suite: String,
    pub wall_clock_s: f64,
    pub per_check_s: Vec<(String, f64)>,
}

pub struct SuiteRun {
    pub report: Report,
    pub timing: Timing,
}

pub(crate) struct Recorder {
    checks: Vec<CheckEntry>,
    times: Vec<(String, f64)>,
}

impl Recorder {
    fn new() -> Self {
        Self { checks: vec![], times: vec![] }
    }

    pub(crate) fn run(&mut self, id: &str, f: impl FnOnce() -> Result<(bool, serde_json::Value)>) -> Result<()> {
        let t0 = Instant::now();
        let (pass, detail) = f()?;
        self.times.push((id.into(), t0.elapsed().as_secs_f64()));
        self.checks.push(CheckEntry { id: id.into(), pass, detail });
        Ok(())
    }
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteRun> {
    config.validate()?;
    let t0 = Instant::now();
    let mut rec = Recorder::new();
    suites::dispatch(config, &mut rec)?;
    let pass = !rec.checks.is_empty() && rec.checks.iter().all(|c| c.pass);
    let report = Report {
        schema: 1,
        suite: config.suite.clone(),
        config_digest: config.digest(),
        config: config.clone(),
        checks: rec.checks,
        pass,
    };
    let timing = Timing { suite: config.suite.clone(), wall_clock_s: t0.elapsed().as_secs_f64(), per_check_s: rec.times };
    Ok(SuiteRun { report, timing })
}

/// Writes `report` to `path` and the timing to `path.timing.json`.
pub fn write_run(run: &SuiteRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&run.report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    let mut tpath = path.as_os_str().to_owned();
    tpath.push(".timing.json");
    std::fs::write(tpath, serde_json::to_string_pretty(&run.timing)? + "\n")?;
    Ok(())
}

/// Builds the global thread pool, capped by `VEXSPACE_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("VEXSPACE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("VEXSPACE_THREADS = {v:?} is not a count")))?;
        // a second initialisation is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(())
}
