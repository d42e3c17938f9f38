//! Config-driven front end for the dual solvers in `dualvar-core`: INI
//! configs, CSV output and the `run`, `verify` and `sweep` commands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod family;
pub mod output;
pub mod suite;

pub use config::{Family, Ini, RunConfig};
pub use error::{CliError, Result};
