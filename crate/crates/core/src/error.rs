use thiserror::Error;

/// Errors raised by the probe laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be positive")]
    EmptyDimension,

    #[error("non-finite amplitude or matrix entry")]
    NonFinite,

    #[error("zero vector where a non-zero state is required")]
    ZeroVector,

    #[error("matrix is not Hermitian (max residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("operator is not unitary (max residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("sampled measurement branch has negligible probability {probability:e}")]
    NegligibleBranch { probability: f64 },

    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("infeasible attack parameters (e = {e}, delta = {delta}): violates {constraint}")]
    Infeasible {
        e: f64,
        delta: f64,
        constraint: &'static str,
    },

    #[error("probe Gram matrix is not positive semidefinite for e = {e}, delta = {delta}")]
    GramNotPositive { e: f64, delta: f64 },

    #[error("probe geometry violates {what} (residual {residual:e})")]
    GeometryViolation { what: &'static str, residual: f64 },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no sifted records")]
    EmptySifted,

    #[error("empty input")]
    EmptyInput,

    #[error("bound violated at e = {e}, delta = {delta}: tau exceeds the bound by {excess:e}")]
    BoundViolation { e: f64, delta: f64, excess: f64 },

    #[error("gain ordering violated at e = {e}: g_c = {g_c} < g_d = {g_d}")]
    GainOrdering { e: f64, g_d: f64, g_c: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("csv output failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
