use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The adaptive rule ran out of panels before meeting its tolerance.
    /// `log_estimate` is the best value reached, usable as a fallback hint.
    #[error("quadrature did not converge: relative error {rel_err:.3e} above tolerance {tol:.3e}")]
    QuadratureNonConvergence {
        log_estimate: f64,
        rel_err: f64,
        tol: f64,
    },

    #[error("series did not converge: last term {last_term:.3e} vs partial sum {partial_sum:.3e}")]
    SeriesDivergence { last_term: f64, partial_sum: f64 },

    /// A detector produced a non-finite statistic. Counted as an erasure.
    #[error("detection failure: statistic {statistic} is not finite")]
    DetectionFailure { statistic: f64 },

    #[error("kernel evaluation failed at z = {z}: {source}")]
    TableBuild {
        z: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("lookup table file {path}: {reason}")]
    TableFormat { path: PathBuf, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
