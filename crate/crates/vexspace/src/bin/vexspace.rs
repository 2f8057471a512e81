use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use vexspace::harness::{generate_field, init_threads, run_suite, write_run, ExponentSpec, SuiteConfig};
use vexspace::exponents::Role;
use vexspace::molecules::{read_coeffs, write_coeffs};
use vexspace::phitransform::{analyze, make_admissible_pair, synthesize, Profile};
use vexspace::sampling::{load_field, save_field, Grid, SampledField};
use vexspace::tlspaces::{f_norm_checked, TLParams};
use vexspace::Result;

#[derive(Parser)]
#[command(name = "vexspace", version, about = "Variable-exponent Triebel-Lizorkin toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// F-norm of a field.
    Norm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward (field → coefficients JSONL) or inverse φ-transform.
    Transform {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite.
    Verify {
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Growth curve of the vector-valued maximal counterexample.
    Counterexample {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace suite on the 2D reference grid.
    Trace {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Input for `norm` and `transform`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpConfig {
    dim: usize,
    n: usize,
    #[serde(default = "one")]
    half_length: f64,
    nu_max: u32,
    #[serde(default = "default_profile")]
    profile: String,
    /// Binary field file; when absent a seeded field is generated.
    #[serde(default)]
    field: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    p: Option<ExponentSpec>,
    #[serde(default)]
    q: Option<ExponentSpec>,
    #[serde(default)]
    alpha: Option<ExponentSpec>,
    /// `forward` (default) or `inverse`.
    #[serde(default)]
    direction: Option<String>,
    /// Coefficient file for the inverse transform.
    #[serde(default)]
    coefficients: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn default_profile() -> String {
    "smoothstep-exp".into()
}

impl OpConfig {
    fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn field(&self, grid: &Grid) -> Result<SampledField> {
        match &self.field {
            Some(p) => {
                let f = load_field(p)?;
                if f.grid != *grid {
                    return Err(vexspace::Error::GridMismatch);
                }
                Ok(f)
            }
            None => generate_field(grid, (self.nu_max as f64).exp2(), self.seed),
        }
    }
}

fn suite_config(suite: &str, path: Option<&Path>) -> Result<SuiteConfig> {
    match path {
        Some(p) => SuiteConfig::load(p, Some(suite)),
        None => SuiteConfig::defaults(suite),
    }
}

fn verify(suite: &str, config: Option<&Path>, out: &Path) -> Result<bool> {
    let cfg = suite_config(suite, config)?;
    let run = run_suite(&cfg)?;
    write_run(&run, out)?;
    for c in &run.report.checks {
        eprintln!("{:<32} {}", c.id, if c.pass { "pass" } else { "FAIL" });
    }
    eprintln!("{suite}: {} in {:.2}s", if run.report.pass { "pass" } else { "FAIL" }, run.timing.wall_clock_s);
    Ok(run.report.pass)
}

fn norm(config: &Path, out: &Path) -> Result<bool> {
    let c = OpConfig::load(config)?;
    let grid = Grid::new(c.dim, c.n, c.half_length)?;
    let f = c.field(&grid)?;
    let pair = make_admissible_pair(&grid, c.nu_max, Profile::parse(&c.profile)?)?;
    let spec = |s: &Option<ExponentSpec>, d: f64| s.clone().unwrap_or(ExponentSpec::constant(d));
    let params = TLParams::new(
        spec(&c.p, 2.0).sample(&grid, Role::PrimaryP)?,
        spec(&c.q, 2.0).sample(&grid, Role::SecondaryQ)?,
        spec(&c.alpha, 0.0).sample(&grid, Role::SmoothnessAlpha)?,
        pair,
    )?;
    let (value, warning) = f_norm_checked(&f, &params)?;
    let body = serde_json::json!({
        "schema": 1,
        "f_norm": value,
        "params_digest": params.digest(),
        "warning": warning,
    });
    std::fs::write(out, serde_json::to_string_pretty(&body)? + "\n")?;
    Ok(true)
}

fn transform(config: &Path, out: &Path) -> Result<bool> {
    let c = OpConfig::load(config)?;
    let grid = Grid::new(c.dim, c.n, c.half_length)?;
    let pair = make_admissible_pair(&grid, c.nu_max, Profile::parse(&c.profile)?)?;
    match c.direction.as_deref().unwrap_or("forward") {
        "forward" => {
            let s = analyze(&c.field(&grid)?, &pair)?;
            let mut w = BufWriter::new(File::create(out)?);
            write_coeffs(&mut w, &s, grid.dim())?;
            w.flush()?;
        }
        "inverse" => {
            let path = c
                .coefficients
                .as_ref()
                .ok_or_else(|| vexspace::Error::InvalidParameter("inverse transform needs `coefficients`".into()))?;
            let s = read_coeffs(std::io::BufReader::new(File::open(path)?))?;
            save_field(out, &synthesize(&s, &pair)?)?;
        }
        other => return Err(vexspace::Error::InvalidParameter(format!("unknown direction {other:?}"))),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let res = match &cli.cmd {
        Cmd::Norm { config, out } => norm(config, out),
        Cmd::Transform { config, out } => transform(config, out),
        Cmd::Verify { suite, config, out } => verify(suite, config.as_deref(), out),
        Cmd::Counterexample { config, out } => verify("counterexample", config.as_deref(), out),
        Cmd::Trace { config, out } => verify("trace", config.as_deref(), out),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
