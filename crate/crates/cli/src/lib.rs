//! Library side of the `alffi` command-line tool: run configuration, file
//! formats and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod io;
pub mod problems;
