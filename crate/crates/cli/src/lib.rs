//! Command-line front end for `growthmix`: fit, select, simulate, bench and
//! evaluate. The binary is a thin clap layer over [`commands`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
