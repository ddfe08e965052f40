//! Experiment runner for the flowlab library.
//!
//! Each subcommand reads a config document, runs one experiment on a thread
//! pool of the requested size and writes CSV tables, optional SVG figures,
//! `summary.json` and `manifest.json` into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod coverage;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod settings;

pub use error::CliError;
pub use experiments::{run, RunOutcome};
pub use settings::{Experiment, Overrides, RunConfig};
