//! Command-line experiment runner: config-driven training, run comparison,
//! oracle verification and config templates.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod svg;
pub mod templates;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
