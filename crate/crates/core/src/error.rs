use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tensor has {entries} entries, exceeding the densification cap of {cap}")]
    TooLarge { entries: usize, cap: usize },

    #[error("orthogonality requirement violated at mode {mode}: {detail}")]
    Orthogonality { mode: usize, detail: String },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("basis `{0}` has unbounded sup-norms")]
    InfiniteSupNorm(String),

    #[error("empty basis")]
    EmptyBasis,

    #[error("variation grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("variation function vanishes at grid point {0}")]
    ZeroVariation(usize),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{n} samples are too few for {folds}-fold cross-validation")]
    TooFewSamples { n: usize, folds: usize },

    #[error("diffusion coefficient is not positive ({0})")]
    NonPositiveCoefficient(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy { kind: &'static str, name: String, available: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
