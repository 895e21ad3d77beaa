use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mode index {l} outside [-{half}, {half}) for M = {m}", half = m / 2)]
    ModeOutOfRange { l: i64, m: usize },

    #[error("malformed field: {0}")]
    MalformedField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("plane-wave fixed point did not converge after {iterations} iterations (last residual {residual:.3e})")]
    PlaneWaveNoConvergence { iterations: usize, residual: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (last update {residual:.3e})")]
    PicardDivergence { iterations: usize, residual: f64 },

    #[error("singular block in cyclic block-tridiagonal solve at row {row}")]
    LinearSolveFailure { row: usize },

    #[error("NonIntegerStepCount: T = {t_final} is not an integer multiple of tau = {tau} (T/tau = {ratio})")]
    NonIntegerStepCount { t_final: f64, tau: f64, ratio: f64 },

    #[error("incompatible resolutions: numeric M = {numeric}, reference M = {reference}")]
    IncompatibleResolution { numeric: usize, reference: usize },

    #[error("reference file {path}: {reason}")]
    ReferenceFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
