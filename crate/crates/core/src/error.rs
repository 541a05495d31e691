use thiserror::Error;

/// Errors produced by the simulation and numerical layers.
#[derive(Debug, Error)]
pub enum RtgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numerical failure: {message} (estimate {estimate:e}, error {error:e}, evaluations {evaluations})")]
    Numerical {
        message: String,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("verification gates failed: {}", .0.join(", "))]
    GateFailure(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RtgError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        RtgError::InvalidInput(msg.into())
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RtgError::InvalidInput(_) => "invalid_input",
            RtgError::Unsupported(_) => "unsupported",
            RtgError::Numerical { .. } => "numerical_failure",
            RtgError::Resource(_) => "resource_refused",
            RtgError::Config(_) => "config_error",
            RtgError::GateFailure(_) => "gate_failed",
            RtgError::Io(_) => "io_error",
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_status(&self) -> i32 {
        match self {
            RtgError::Config(_) | RtgError::InvalidInput(_) | RtgError::Unsupported(_) => 2,
            RtgError::Numerical { .. } | RtgError::GateFailure(_) => 3,
            RtgError::Resource(_) => 4,
            RtgError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, RtgError>;
