use thiserror::Error;

/// Errors raised by the telescopy numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("capacity exceeded: {what} = {value} (limit {limit})")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("ancilla is not normalized: norm^2 = {0}")]
    Unnormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("|g| = 1 makes the |g| Fisher information singular")]
    Singular,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown ancilla kind `{0}`")]
    UnknownKind(String),

    #[error("probabilities do not form a distribution: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
