use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed encoding: {0}")]
    MalformedEncoding(&'static str),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("infeasible target: {0}")]
    Infeasible(String),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("training diverged at round {round}, client {client}: loss {loss}")]
    Diverged { round: usize, client: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
