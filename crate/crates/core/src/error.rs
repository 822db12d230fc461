use thiserror::Error;

/// Errors raised by the simulation and verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid reproduction law: {0}")]
    InvalidLaw(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("ordering assumption violated: {0}")]
    OrderingViolation(String),

    #[error("label geometry violated: N = {big_n} < i + 2j with i = {i}, j = {j}")]
    GeometryViolation { i: u64, j: u64, big_n: u64 },

    #[error("sample size {n} exceeds the {big_n} available labels")]
    SampleExceedsPopulation { n: u64, big_n: u64 },

    #[error("total event rate {rate} exceeds the configured bound {bound}")]
    RateOverflow { rate: f64, bound: f64 },

    #[error("negative diffusion coefficient {value} at w = {w}")]
    NegativeVariance { w: f64, value: f64 },

    #[error("dual chain rates must be nonnegative: {0}")]
    InvalidDualParams(String),

    #[error("sample of {m} lineages exceeds the final population size {size}")]
    SampleTooLarge { m: u64, size: u64 },

    #[error("statistics requested on an empty sample")]
    EmptySample,

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
