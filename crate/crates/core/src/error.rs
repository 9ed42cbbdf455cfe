use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid Fock dimension {0} (need at least 2)")]
    InvalidDimension(usize),

    #[error("Fock truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("ion outside the tapered region: 1 + gamma*z = {0:e} <= 0")]
    OutOfTaper(f64),

    #[error(
        "Newton propagator did not converge within {max_order} terms (last term {last_term:e})"
    )]
    NonConvergence { max_order: usize, last_term: f64 },

    #[error("dimension {dim} exceeds the dense oracle limit of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("invalid propagation step: {0}")]
    InvalidStep(String),

    #[error("cycle count {requested} exceeds the full-simulation cap of {cap}")]
    TooManyCycles { requested: usize, cap: usize },
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::TooManyCycles { .. }
        )
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::TruncationTooSmall(_) => "truncation_too_small",
            Error::OutOfTaper(_) => "out_of_taper",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DimensionTooLarge { .. } => "dimension_too_large",
            Error::InvalidStep(_) => "invalid_step",
            Error::TooManyCycles { .. } => "too_many_cycles",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
