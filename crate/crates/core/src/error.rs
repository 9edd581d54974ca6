use thiserror::Error;

/// Errors raised while building charts and evaluating geometric objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("jet order {0} exceeds the supported maximum of 3")]
    Order(usize),

    #[error("variance mismatch: {0}")]
    Variance(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular metric at {point:?} (det = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parse error at {position}: {message} (expected one of: {})", expected.join(", "))]
    Parse {
        position: usize,
        message: String,
        expected: Vec<String>,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("degenerate constant-curvature fit: {0}")]
    DegenerateFit(String),

    /// Equivalent conditions gave contradictory verdicts.
    #[error("consistency error: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
