use thiserror::Error;

/// Errors raised by model construction, enumeration and the learning loops.
#[derive(Debug, Error)]
pub enum PsrError {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("enumeration of {leaves} trajectories exceeds the cap of {cap}")]
    EnumerationCap { leaves: u128, cap: u128 },

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("history has probability {prob:e}, at or below the normalization guard")]
    DegenerateHistory { prob: f64 },

    #[error("core tests are ill-conditioned at step {step} (condition number {condition:e})")]
    SingularCoreTests { step: usize, condition: f64 },

    #[error("core tests do not span the dynamics at step {step} (reconstruction error {error:e})")]
    InsufficientCoreTests { step: usize, error: f64 },

    #[error("Theta_min filter removed every candidate{context}")]
    EmptyFeasibleSet { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("rejection budget of {0} draws exhausted")]
    RejectionBudget(usize),

    #[error("candidate family of {0} members exceeds the blow-up guard")]
    CandidateBlowUp(u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PsrError>;
