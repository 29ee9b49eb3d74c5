use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group order {0}")]
    InvalidOrder(usize),
    #[error("element index {index} out of range for group of order {order}")]
    InvalidElement { index: usize, order: usize },
    #[error("subgroup is not valid: {0}")]
    InvalidSubgroup(String),
    #[error("subgroup is not normal in the parent group")]
    NotNormal,
    #[error("probe set must be non-empty")]
    InsufficientProbes,
    #[error("carrier does not match the action's descriptor: {0}")]
    CarrierMismatch(String),
    #[error("expected a group of order {expected}, got {got}")]
    WrongGroup { expected: usize, got: usize },
    #[error("non-square image: {h}x{w}")]
    NonSquare { h: usize, w: usize },
    #[error("carrier length {len} is not divisible into {blocks} blocks")]
    BlockMismatch { len: usize, blocks: usize },
    #[error("action does not descend to the quotient: {0}")]
    NotWellDefined(String),
    #[error("maps cannot be composed: {0}")]
    Composition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target must be one-hot")]
    Label(String),
    #[error("parameter registry mismatch: {0}")]
    Parameter(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("inconsistent data: {0}")]
    Consistency(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Training(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
