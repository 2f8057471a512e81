//! Numerical toolkit for variable-exponent Triebel-Lizorkin spaces on a
//! periodic grid.
//!
//! The crate is organised bottom-up:
//!
//! * [`sampling`] - grids, fields, dyadic cubes, FFT convolution, field files
//! * [`exponents`] - variable exponents and their log-Hölder constants
//! * [`lebesgue`] - modulars, Luxemburg norms, mixed `L^p(l^q)` norms
//! * [`mollifiers`] - the `η_{ν,m}` kernels, maximal operator, kernel lemmas
//! * [`phitransform`] - admissible pairs, ladders, analysis and synthesis
//! * [`tlspaces`] - F-norms and the equivalence / embedding checks
//! * [`molecules`] - molecule checks and `t*` smoothing of coefficients
//! * [`traces`] - restriction to a line and trace coefficients
//! * [`harness`] - seeded fields, suites and reports

pub mod exponents;
pub mod harness;
pub mod lebesgue;
pub mod molecules;
pub mod mollifiers;
pub mod phitransform;
pub mod sampling;
mod special;
pub mod tlspaces;
pub mod traces;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("level {level} is not resolvable on this grid: {reason}")]
    LevelTooDeep { level: u32, reason: String },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("Luxemburg bisection did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("band limit violated: {0}")]
    BandLimit(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
