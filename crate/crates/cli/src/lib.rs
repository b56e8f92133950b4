//! Scenario runner: parses sectioned scenario files, solves once, runs the
//! selected analyses against the stored trajectory and writes fixed-column
//! CSV tables with JSON mirrors, plot-ready data and a metadata sidecar.

// `!(x > 0.0)` rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod sweep;

pub use error::CliError;
