use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty region: no pixel centre inside a disc of radius {radius} at spacing {spacing}")]
    EmptyRegion { radius: f64, spacing: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("resonant or singular system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("power iteration did not converge after {iterations} iterations (estimate {estimate}, gap {gap:e})")]
    NotConverged {
        iterations: usize,
        estimate: f64,
        gap: f64,
    },

    #[error("unsupported objective: {0}")]
    Unsupported(String),

    #[error("dual scale {lambda:e} below the minimum {lambda_min:e}")]
    DualScaleTooSmall { lambda: f64, lambda_min: f64 },
}
