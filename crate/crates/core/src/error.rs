use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e})")]
    NotSkew { asymmetry: f64 },

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },

    #[error("vector is not tangent to the sphere at its base point (q·ξ = {dot:.3e})")]
    NotTangent { dot: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("reference is not stationary: {0}")]
    NonStaticReference(String),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("state diverged at t = {t} (|ω| = {norm:.3e})")]
    Diverged { t: f64, norm: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("eigenbasis is defective (condition number {condition:.3e})")]
    DefectiveEigenbasis { condition: f64 },

    #[error("initial condition violates the pointing constraint (|Cx| = {residual:.3e})")]
    OutsideNullSpace { residual: f64 },

    #[error("no admissible complex eigenvalue pair found: {0}")]
    NoComplexPair(String),

    #[error("Euler 3-1-3 angles are singular (sin θ = {sin_theta:.3e})")]
    EulerSingular { sin_theta: f64 },

    #[error("spectrum has no peak: {0}")]
    NoSpectralPeak(String),

    #[error("signal too short for spectral analysis ({len} samples, need at least {min})")]
    SignalTooShort { len: usize, min: usize },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("trace file {path}: {message}")]
    TraceFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
