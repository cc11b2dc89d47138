use thiserror::Error;

/// Failures raised by the analysis, simulation and starvation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("offered load {offered} is not below the throughput-curve peak {peak}")]
    InfeasibleLoad { offered: f64, peak: f64 },

    #[error("fixed point not bracketed on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    FixedPointFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("queue is unstable: utilisation {utilisation} >= 1")]
    UnstableQueue { utilisation: f64 },

    #[error("need at least {needed} replications, got {got}")]
    InsufficientReplications { needed: usize, got: usize },

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
