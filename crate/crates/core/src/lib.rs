//! Numerical toolkit for statistical manifolds: metrics with a totally
//! symmetric cubic form, their dual affine connections, curvature, projective
//! invariants and sampled diagnostics over a chart.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod jets;
pub mod models;
pub mod special;
pub mod structure;
pub mod tensor;

pub use diagnostics::{
    alpha_scan, check_conjugate_nabla, check_conjugate_r, check_conjugate_ric, check_projectively_flat,
    check_ricci_symmetric, check_trace_free, fit_constant_curvature, run_diagnostics, sample_points,
    verify_constant_curvature_characterization, verify_trace_free_characterization, AlphaScan, CheckResult,
    ConstantCurvatureFit, DiagnosticsConfig, DiagnosticsReport, TheoremReport, Verdict,
};
pub use error::{Error, Result};
pub use jets::{eval_jet, FieldSource, Jet, JetStrategy, Point, ScalarField, MAX_ORDER};
pub use models::{builtin_chart, Family, FisherSource, GammaChart, ModelSpec};
pub use structure::{Chart, ConnectionCoeffs, ConnectionKind, LocalGeometry};
pub use tensor::{max_norm, rel_defect, Metric, Scalar, Tensor, Variance};
