//! Configuration, reporting and subcommands of the `histvar` binary.

pub mod commands;
pub mod config;
pub mod output;
