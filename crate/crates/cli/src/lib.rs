//! Pipeline subcommands and the HTTP service.

pub mod cli;
pub mod service;
