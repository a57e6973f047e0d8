//! Error types shared across the crate.

use crate::expr::ParseError;

/// Unified error for every fallible operation in the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Evaluation hit a pole, a sqrt of a non-positive value, or a point
    /// outside the declared parameter domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The differential of the immersion dropped below rank 2.
    #[error("rank error: {0}")]
    Rank(String),

    /// sin(theta) fell below the adapted-frame cutoff; the surface is
    /// complex (theta in {0, pi}) at this point up to round-off.
    #[error("near-complex point: {0}")]
    NearComplex(String),

    /// |eta| fell below the cutoff, so the Lagrangian angle does not exist.
    #[error("lagrangian angle undefined: {0}")]
    UndefinedAngle(String),

    /// An iterative procedure hit its budget before reaching tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// An operation required an adapted frame but got a generic one.
    #[error("frame error: {0}")]
    Frame(String),

    /// Catalog or family parameters outside their documented ranges.
    #[error("parameter error: {0}")]
    Param(String),

    /// An integral identity was requested on a surface whose domain does
    /// not support it (e.g. Stokes checks on non-closed surfaces).
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    /// Expression text failed to parse.
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    /// A surface definition file failed to parse; carries the 1-based line.
    #[error("surface file, line {line}: {message}")]
    SurfaceFile { line: usize, message: String },
}

impl Error {
    /// Stable machine-readable tag used in JSON reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Rank(_) => "rank",
            Error::NearComplex(_) => "near_complex",
            Error::UndefinedAngle(_) => "undefined_angle",
            Error::NonConvergence(_) => "non_convergence",
            Error::Frame(_) => "frame",
            Error::Param(_) => "param",
            Error::UnsupportedDomain(_) => "unsupported_domain",
            Error::Parse(_) => "parse",
            Error::SurfaceFile { .. } => "surface_file",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
