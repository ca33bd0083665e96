use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parameter `{name}` = {value} out of range: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown risk function `{name}` at position {pos}")]
    UnknownFunction { name: String, pos: usize },

    #[error("alphabet too large: M = {m}, at most {max} supported")]
    AlphabetTooLarge { m: usize, max: usize },

    #[error("risk functional `{0}` is not continuous (pass --allow-discontinuous to override)")]
    Discontinuous(String),

    #[error("risk functional `{0}` is not flagged dominant")]
    NotDominant(String),

    #[error("reward {0} is not a support point of the multinomial arm")]
    RewardNotInSupport(f64),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("incompatible policy: {0}")]
    IncompatiblePolicy(String),

    #[error("solver budget exhausted after {iterations} iterations (best value so far {best_value})")]
    SolverBudget { best_value: f64, iterations: usize },

    #[error("config error ({location}): {msg}")]
    Config { location: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the CLI: 2 for configuration and input
    /// errors, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverBudget { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
