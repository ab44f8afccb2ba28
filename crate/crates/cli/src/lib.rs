//! Command-line front end: the expression syntax and the subcommands.

pub mod commands;
pub mod surface;
