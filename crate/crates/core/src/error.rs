use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GouError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("jump of size -1 in the exponent process at t = {time}: the stochastic exponential would vanish")]
    JumpAtMinusOne { time: String },

    #[error("jumps of U must be strictly greater than -1 ({0})")]
    ConditionB(String),

    #[error("exact backend requested but the Gaussian covariance is nonzero")]
    ExactWithGaussian,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series are not aligned: {0}")]
    Misaligned(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty sample")]
    EmptySample,

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, GouError>;
