use std::fmt;

use thiserror::Error;

/// Pipeline stage reported when a whole-design evaluation fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Process,
    Mechanics,
    Transduction,
    Pierce,
    Simulate,
    Explore,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Process => "process",
            Stage::Mechanics => "mechanics",
            Stage::Transduction => "transduction",
            Stage::Pierce => "pierce",
            Stage::Simulate => "simulate",
            Stage::Explore => "explore",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("bias {bias:.4} V is at or above the pull-in voltage {pull_in:.4} V")]
    PullIn { bias: f64, pull_in: f64 },

    #[error("fixed-point solve did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("stiffness perturbation {dk:e} N/m leaves a non-positive stiffness (k = {k:e} N/m)")]
    InvalidPerturbation { k: f64, dk: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical instability: non-finite state at step {step} (t = {time:e} s)")]
    NumericalInstability { step: usize, time: f64 },

    #[error("grid of {size} points exceeds the cap of {cap}")]
    GridTooLarge { size: u128, cap: u64 },

    #[error("no feasible point on the initial grid; most violated constraint: {constraint} (violation {violation:.4})")]
    InfeasibleProblem { constraint: String, violation: f64 },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// Tag the error with the pipeline stage it came from.
    pub fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::input(
            field,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

pub(crate) fn require_non_negative(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::input(
            field,
            format!("must be non-negative and finite, got {value}"),
        ))
    }
}
