//! Command line pipeline around `granular-core`: CSV/JSON ingestion and persistence, TOML run
//! configuration, and one function per subcommand (`count`, `fit`, `simulate`, `infer`,
//! `ppc`, `kernel-audit`, `show-config`, `run`).

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//!
//! Every output is a deterministic function of the inputs, the configuration and the seed;
//! the worker count only changes how fast it is produced.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, Result};
