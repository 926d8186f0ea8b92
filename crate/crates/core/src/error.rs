use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("root of J0 #{index} not bracketed by ({lo}, {hi})")]
    RootBracket { index: usize, lo: f64, hi: f64 },

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: String, residual: f64 },

    #[error("orthonormality residual {residual:e} exceeds {tolerance:e} with {nodes} nodes")]
    Orthonormality {
        residual: f64,
        tolerance: f64,
        nodes: usize,
    },

    #[error("quadrature resolution ceiling exceeded: need {needed} nodes, limit {limit}")]
    ResolutionCeiling { needed: usize, limit: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("energy drift {drift:e} above tolerance {tolerance:e} at dt floor {dt:e}")]
    DriftGate { drift: f64, tolerance: f64, dt: f64 },

    #[error("incompatible time grids: {0}")]
    TimeGrid(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("results with different config hashes cannot be aggregated ({expected} vs {got})")]
    MixedConfig { expected: String, got: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
