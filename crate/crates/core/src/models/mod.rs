//! Expression language, Fisher quadrature and built-in model charts.

pub mod builtin;
pub mod expr;
pub mod fisher;

pub use builtin::{builtin_chart, Family, FisherSource, GammaChart, ModelSpec};
pub use expr::{parse_expression, Expr};
pub use fisher::{fisher_by_quadrature, FisherTensors, GammaLikelihood, GammaParams, LogLikelihood, NormalLikelihood};
