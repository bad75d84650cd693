use std::path::PathBuf;
use thiserror::Error;

use crate::stencil::DerivKind;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0:?} is not representable on the compact 3x3 stencil; use the auxiliary relations")]
    NonCompactDerivative(DerivKind),

    #[error("denominator {name} too small: |{value:.3e}| < {threshold:.3e}")]
    ZeroDenominator {
        name: &'static str,
        value: f64,
        threshold: f64,
    },

    /// Node-level failure annotated with its grid location.
    #[error("at node ({i}, {j}): {source}")]
    AtNode {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("diverged at step {step} (t = {time:.6e}): max-norm {norm:.3e}")]
    Diverged { step: usize, time: f64, norm: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a grid location to a node-level error.
    pub fn at_node(self, i: usize, j: usize) -> Self {
        Error::AtNode {
            i,
            j,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used for process exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::NonFinite(_) | Error::Config(_) => "config",
            Error::SolveFailure(_) | Error::Diverged { .. } => "solver",
            Error::Io { .. } => "io",
            Error::AtNode { source, .. } => source.category(),
            _ => "numerics",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
