use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Fixed-point iteration hit `max_iter` without meeting the tolerance.
    #[error("deterministic-equivalent iteration did not converge for {context} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// `I - J` in the derivative system is singular (spectral radius of `J` >= 1).
    #[error("derivative system singular for {context}: spectral radius of J is {spectral_radius}")]
    SingularDerivative {
        context: String,
        spectral_radius: f64,
    },

    #[error("ill-conditioned matrix: condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a leave-out / problem label to solver errors.
    pub fn with_context(self, label: impl Into<String>) -> Self {
        let label = label.into();
        match self {
            Error::NoConvergence {
                context,
                iterations,
                residual,
            } => Error::NoConvergence {
                context: format!("{label}: {context}"),
                iterations,
                residual,
            },
            Error::SingularDerivative {
                context,
                spectral_radius,
            } => Error::SingularDerivative {
                context: format!("{label}: {context}"),
                spectral_radius,
            },
            other => other,
        }
    }
}
