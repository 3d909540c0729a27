use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    /// The covariance could not be factorized. `null_direction` is a unit
    /// vector spanning (approximately) the offending null space.
    #[error("singular covariance (condition indicator {condition:e})")]
    SingularCovariance {
        condition: f64,
        null_direction: Vec<f64>,
    },

    #[error("observable has zero variance")]
    ZeroVariance,

    #[error("singular low-rank core in Woodbury inverse")]
    SingularCore,

    #[error("root finding did not converge: {0}")]
    Convergence(String),

    /// `d·sqrt(μM)` never reached one on the scan grid.
    #[error("no crossing of the resolution threshold: max g = {max_g} at d = {at_d}")]
    NoCrossing { max_g: f64, at_d: f64 },

    /// The threshold was already exceeded at the smallest scanned separation.
    #[error("resolution threshold crossed below the scan grid (g = {g_min} at d = {d_min_scanned})")]
    CrossingBelowScan { g_min: f64, d_min_scanned: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
