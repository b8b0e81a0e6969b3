use thiserror::Error;

/// Errors produced by tensor construction, algebra, algorithms, and file parsing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode {mode} is out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("index {index:?} is out of bounds for shape {shape}")]
    IndexOutOfBounds { index: Vec<usize>, shape: String },

    #[error("dense tensor of {size} scalars exceeds the budget of {budget} scalars")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error("mode {mode}, slice {index} has no observed entries")]
    EmptySlice { mode: usize, index: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
