use thiserror::Error;

/// Errors produced by the toolbox.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid request: {0}")]
    InvalidGrid(String),

    #[error("invalid plant data: {0}")]
    InvalidPlant(String),

    #[error("invalid multiplier: {0}")]
    InvalidMultiplier(String),

    #[error("synthesis infeasible: {0}")]
    Infeasible(String),

    #[error("SDP solver failure: {0}")]
    SolverFailure(String),

    #[error("scenario violates admissible class: {0}")]
    ScenarioViolation(String),

    #[error("zero disturbance energy over the horizon")]
    ZeroDisturbance,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
