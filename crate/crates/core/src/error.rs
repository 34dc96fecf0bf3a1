use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("communication graph is not strongly connected")]
    NotStronglyConnected,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("invalid communication graph: {0}")]
    InvalidGraph(String),
    #[error("agent {agent} is not active at t = {t} s")]
    InactiveAgent { agent: usize, t: f64 },
    #[error("negative integration segment ({0} s)")]
    NegativeSegment(f64),
    #[error("t = {t} s is not a check instant (next check at {expected} s)")]
    NotACheckInstant { t: f64, expected: f64 },
    #[error("network admittance matrix is singular")]
    SingularNetwork,
    #[error("droop voltage iteration did not converge")]
    VoltageDivergence,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("trace never settles within tolerance")]
    NotConverged,
}

pub type Result<T> = std::result::Result<T, Error>;
