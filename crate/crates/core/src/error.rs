use std::path::PathBuf;

use crate::degrees::MechanismDegree;

/// Errors produced by the optimization engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller passed a value outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A run configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// The reduced stiffness matrix is not positive definite. Carries the
    /// pivot (free-equation index) at which factorization broke down.
    #[error("stiffness matrix is singular or indefinite at pivot {pivot}")]
    Singular { pivot: usize },

    /// A mechanism degree produced zero strain energy at the first iteration,
    /// so its normalization reference is undefined.
    #[error("degenerate problem: degree {degree} does not strain the domain")]
    DegenerateDegree { degree: MechanismDegree },

    /// The dense reference path was asked to handle a problem beyond its
    /// intended scale.
    #[error("dense oracle refused: {n} elements exceeds the {limit}-element guard")]
    OracleScale { n: usize, limit: usize },

    /// Non-finite numbers reached the optimizer.
    #[error("numerical error: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
