//! Command-line tool and HTTP service around `provox-core`.

pub mod backend;
pub mod cli;
pub mod repl;
pub mod service;
