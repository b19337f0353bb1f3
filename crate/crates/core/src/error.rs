use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stretch parameters must be nonzero (got a={a}, b={b})")]
    DegenerateStretch { a: f64, b: f64 },

    #[error("point ({x}, {z}) lies outside the field window")]
    OutOfDomain { x: f64, z: f64 },

    #[error("region is empty or inverted")]
    EmptyRegion,

    #[error("word ball of radius {radius} would exceed the {limit}-element guard")]
    MemoryGuard { radius: u32, limit: usize },

    #[error("resolution guard: {0}")]
    Resolution(String),

    #[error("characteristic flow failed: {0}")]
    Flow(String),

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
