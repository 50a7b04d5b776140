//! Batch front end for the half-range solver: one TOML config in, a solution
//! CSV and a JSON report out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cache;
pub mod config;
pub mod report;
pub mod run;

pub use run::{run, Invocation, Mode, EXIT_ADMISSIBILITY, EXIT_CONFIG, EXIT_OK, EXIT_ORACLE, EXIT_SOLVER};
