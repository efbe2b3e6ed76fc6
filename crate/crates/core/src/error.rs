use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input is not a hyperedge encoding")]
    NotAnEncoding,

    #[error(
        "parameter magnitude {value} exceeds bound {bound} (n = {n} is below the regime floor)"
    )]
    BoundViolation { value: f64, bound: f64, n: usize },

    #[error("network has no neuron group named {0}")]
    MissingGroup(String),

    #[error("oracle depleted: all {0} challenge hyperedges consumed")]
    OracleDepleted(usize),

    #[error("challenge secret is not available")]
    SecretUnavailable,

    #[error("holdout set is empty")]
    EmptyHoldout,

    #[error("linear system stayed singular up to ridge {0}")]
    SingularSystem(f64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
