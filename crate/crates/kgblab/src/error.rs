use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Pointwise domain failure, e.g. a negative discriminant in the slaving map.
    #[error("domain error at grid index {index} (value {value}): {what}")]
    Domain { index: usize, value: f64, what: String },

    /// The run left the small-amplitude regime (invariant lost mid-run).
    #[error("invariant violated at T = {time}: {what}")]
    InvariantViolation { time: f64, what: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// Smallness gate of the normal-form construction failed.
    #[error("regime error: {what} (measured {measured:.3e}, gate {gate:.3e})")]
    Regime { what: String, measured: f64, gate: f64 },

    #[error("kernel sequence diverged after {stages} stages; ratios {ratios:?}")]
    Divergence { stages: usize, ratios: Vec<f64> },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("symmetry violation: imaginary part {defect:.3e} exceeds {tol:.1e}")]
    SymmetryViolation { defect: f64, tol: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
