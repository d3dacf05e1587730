use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("BCH table supports step <= {max}, algebra has step {step}")]
    StepTooLarge { step: usize, max: usize },

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),

    #[error("invalid gauge: {0}")]
    InvalidGauge(String),

    #[error("invalid action group: {0}")]
    InvalidGroup(String),

    #[error("invalid step distribution: {0}")]
    InvalidDistribution(String),

    #[error("I - Ad(mu_Q) is singular on W (smallest singular value {0:e}); check the invariant-vector tolerance")]
    SingularRestriction(f64),

    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),

    #[error("resource ceiling exceeded: {requested} steps requested, ceiling {ceiling}")]
    ResourceCeiling { requested: u128, ceiling: u128 },

    #[error("statistics: {0}")]
    Stats(String),

    #[error("rotation order does not divide {order}")]
    OrderMismatch { order: usize },

    #[error("lift is not in Sigma: element {0} has no fixed point")]
    NotInSigma(usize),

    #[error("corrupt lift: relator ({0}, {1}) has non-identity rotation part")]
    CorruptLift(usize, usize),

    #[error("scan produced no Sigma_1 members: {0}")]
    EmptyScan(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
