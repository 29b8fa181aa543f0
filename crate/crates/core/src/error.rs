use std::path::PathBuf;

use crate::geometry::Violation;
use crate::specialfn::RootWithMultiplicity;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected} real coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("the zero polynomial has no well-defined root set")]
    ZeroPolynomial,

    /// The root finder stopped before every root met the residual bound.
    /// `partial` carries the last iterates; they must not be trusted.
    #[error("root finder did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        partial: Vec<RootWithMultiplicity>,
    },

    #[error("rejection sampler accepted nothing after {proposals} proposals (degenerate annulus?)")]
    RejectionFailure { proposals: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("link parameters violate the thickness bound: {}", fmt_violations(.0))]
    InvalidParameters(Vec<Violation>),

    /// A sub-oracle could not produce a trustworthy answer for this draw.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("oracle disagreement on {curve}: order {order}, lambda0 {lambda0}, link {link}")]
    OracleDisagreement {
        curve: String,
        order: usize,
        lambda0: usize,
        link: usize,
    },

    #[error("unknown curve id `{0}`")]
    UnknownCurve(String),

    #[error("malformed point cloud at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report format: {0}")]
    Format(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::RejectionFailure { .. }
            | Error::Degenerate(_)
            | Error::OracleDisagreement { .. } => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
