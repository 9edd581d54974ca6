//! The `statman` command line: load a manifold file, run checks, evaluate
//! tensors, sweep α and verify the characterization theorems.

pub mod commands;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod report;

pub use commands::{run, Cli, Outcome};
pub use error::CliError;
pub use manifest::{load, ManifoldFile};
pub use report::ReportDocument;
