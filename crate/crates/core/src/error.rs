use thiserror::Error;

/// Errors produced by the optimizer kernels, task models and harness.
#[derive(Debug, Error)]
pub enum MdsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("entry {index} is {value}, which is outside the required domain ({requirement})")]
    DomainViolation {
        index: usize,
        value: f64,
        requirement: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate update: weights sum to {sum} and cannot be normalized")]
    DegenerateUpdate { sum: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("non-finite state during trajectory integration at step {step}")]
    IntegrationBlowup { step: usize },

    #[error("unnormalizable conditional distribution at step {step}, state {state}")]
    UnnormalizableConditional { step: usize, state: usize },

    #[error("configuration invalid:\n{}", issues.join("\n"))]
    Config { issues: Vec<String> },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MdsError>;

impl MdsError {
    /// Exit code the CLI maps this error to: 1 for configuration problems,
    /// 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            MdsError::Config { .. } | MdsError::InvalidParameter { .. } => 1,
            _ => 2,
        }
    }
}
