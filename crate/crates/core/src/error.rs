use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("Poisson solver did not converge after {iterations} Newton iterations (residual {residual:e})")]
    PoissonDivergence { iterations: usize, residual: f64 },

    #[error("time step failed at t = {time}: {reason}")]
    StepFailure { time: f64, reason: StepFailureKind },

    #[error("characteristics crossed between particles {index} and {next}")]
    Crossing { index: usize, next: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("insufficient samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

/// Why an implicit step was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailureKind {
    NotConverged,
    DensityNotPositive,
    NonFinite,
    Poisson,
}

impl std::fmt::Display for StepFailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StepFailureKind::NotConverged => "nonlinear iteration did not converge",
            StepFailureKind::DensityNotPositive => "density lost positivity",
            StepFailureKind::NonFinite => "non-finite values",
            StepFailureKind::Poisson => "Poisson solve failed",
        };
        f.write_str(s)
    }
}
