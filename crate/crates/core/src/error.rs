use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("both treatment arms must be represented")]
    SingleArm,

    #[error("signature model is unusable (degenerate clustering)")]
    UnusableModel,

    #[error("screening cap of {cap} candidates exceeded with {enrolled} of {target} enrolled")]
    ScreeningCapExceeded { cap: usize, enrolled: usize, target: usize },

    #[error("patient supplier exhausted")]
    SupplierExhausted,

    #[error("config error: {0}")]
    Config(String),

    #[error("data error at line {line}, column '{column}': {message}")]
    Data { line: u64, column: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
