use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("quadrature order must be at least 1")]
    ZeroOrder,

    #[error("integrand is not finite at node {node:?} (value {value})")]
    NonFiniteIntegrand { node: Vec<f64>, value: String },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("basis numerically dependent at this truncation/precision: {0}")]
    NumericallyDependent(String),

    #[error(
        "Gram-Schmidt lost positivity at step {step} (label {label}, squared norm {norm_sq:e}); \
         try a lower truncation"
    )]
    PositivityLoss { step: usize, label: i64, norm_sq: f64 },

    #[error("series tail estimate {estimate:e} exceeds tolerance {tolerance:e}; {hint}")]
    TailTooLarge {
        estimate: f64,
        tolerance: f64,
        hint: &'static str,
    },

    #[error("division guard violated at {location}: |K| = {magnitude:e} below {threshold:e}")]
    DivisionGuard {
        location: String,
        magnitude: f64,
        threshold: f64,
    },

    #[error("operator must be diagonal in the basis: {0}")]
    NotDiagonal(String),

    #[error("divergent parameter regime: {0}")]
    Divergent(String),

    #[error("step {step} of the evolution failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
