//! Error types shared across the crate.
//!
//! Errors are split by how the command-line driver maps them to exit codes:
//! configuration problems (exit 2), numerical or I/O failures during a run
//! (exit 3), and certification violations (exit 1, reported by the drivers
//! themselves rather than as an `Err`).

use thiserror::Error;

/// Problems with user-supplied configuration: unknown keys, values out of
/// range, missing files, unparseable TOML.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config file `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Failures of the geometry kernel on concrete grid data.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate induced metric at site ({u}, {v}): det g = {det:.3e}")]
    DegenerateMetric { u: usize, v: usize, det: f64 },
    #[error("point at site ({u}, {v}) is off the model surface by {dist:.3e} (tolerance {tol:.3e})")]
    OffModel { u: usize, v: usize, dist: f64, tol: f64 },
    #[error("cannot build an orthonormal normal frame at site ({u}, {v})")]
    FrameBreakdown { u: usize, v: usize },
    #[error("non-finite value in {what} at site ({u}, {v})")]
    NonFinite { what: &'static str, u: usize, v: usize },
}

/// Domain errors in scalar functionals (invalid exponents, undefined
/// denominators requested in a context that cannot skip them).
#[derive(Debug, Error)]
pub enum DomainError {
    #[error("{0}")]
    Invalid(String),
}

/// Top-level error for library entry points and the CLI driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: u64, message: String },
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Geometry(_) | Error::Numerical { .. } | Error::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
