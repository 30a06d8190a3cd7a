use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("joint covariance has a negative eigenvalue {eigenvalue} (tolerance {tolerance})")]
    NotValidJoint { eigenvalue: f64, tolerance: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("mapping size {size} exceeds min({n_u}, {n_v})")]
    Size { size: usize, n_u: usize, n_v: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("incompatible shapes: {0}")]
    Shape(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("mappings differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("theta lies outside the convergence region: {0}")]
    OutsideConvergenceRegion(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("x = {x} needs correlation {rho} >= 1 with {dims} dimensions")]
    InfeasibleRho { x: f64, rho: f64, dims: usize },
    #[error("oracle disagreement: {0}")]
    OracleMismatch(String),
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
