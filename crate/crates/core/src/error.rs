//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two arrays or grids that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter violates its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An inner linear solve failed to reach its tolerance.
    #[error("linear solver failed after {iterations} iterations (relative residual {residual:.3e}): {context}")]
    Solver {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// Internal invariant broken, e.g. a negative Bregman distance.
    #[error("consistency check failed: {0}")]
    Consistency(String),

    /// Failure inside the Kaczmarz sweep, tagged with the sweep and equation index.
    #[error("sweep {sweep}, equation {index}: {source}")]
    Step {
        sweep: usize,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    /// Failure in one stage of an experiment run.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
