use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the estimation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("simplex exceeded its iteration cap of {cap} (ill-conditioned input)")]
    NumericalFailure { cap: usize },

    #[error("only {available} design points, window needs {required}")]
    EmptyWindow { available: usize, required: usize },

    #[error("no quadrature node passed the |a| <= B threshold")]
    DegenerateDenominator,

    #[error("weighted design is singular")]
    SingularDesign,

    #[error("log-spacing bracket is not positive ({bracket:e})")]
    DegenerateSpacings { bracket: f64 },

    #[error("sup-inf attained at index {index} beyond half the truncation {truncation}")]
    TruncationSuspect { index: usize, truncation: usize },

    #[error("{suspect} of {draws} Monte-Carlo draws hit the truncation guard")]
    TooManySuspect { suspect: usize, draws: usize },

    #[error("quadrature node has no process points within unit radius")]
    EmptyNeighbourhood,

    #[error("sup-inf functional unexpectedly unbounded")]
    UnboundedFunctional,

    #[error("{failures} of {reps} replications failed")]
    ScenarioFailed { failures: usize, reps: usize },

    #[error("{failed} of {total} grid points failed")]
    GridFailed { failed: usize, total: usize },

    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: non-finite value")]
    NonFinite { path: PathBuf, line: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the data or configuration rather than by
    /// the numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::MalformedRow { .. }
                | Error::NonFinite { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }

    /// Short machine-readable tag used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::EmptyWindow { .. } => "empty_window",
            Error::DegenerateDenominator => "degenerate_denominator",
            Error::SingularDesign => "singular_design",
            Error::DegenerateSpacings { .. } => "degenerate_spacings",
            Error::TruncationSuspect { .. } => "truncation_suspect",
            Error::TooManySuspect { .. } => "too_many_suspect",
            Error::EmptyNeighbourhood => "empty_neighbourhood",
            Error::UnboundedFunctional => "unbounded_functional",
            Error::ScenarioFailed { .. } => "scenario_failed",
            Error::GridFailed { .. } => "grid_failed",
            Error::MalformedRow { .. } => "malformed_row",
            Error::NonFinite { .. } => "non_finite",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
