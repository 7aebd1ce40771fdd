//! Command layer of the `n2i` tool: configuration handling and the commands
//! themselves, kept in a library so they can be driven from tests.

pub mod commands;
pub mod config;

pub use commands::run;
pub use config::{Command, RunConfig};
