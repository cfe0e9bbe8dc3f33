//! Configuration parsing and the four subcommands of the `nsp` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command, RunConfig};
pub use config::{parse_config, parse_config_with, Config, ParseError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    /// A certificate or stability verdict failed.
    pub const VERDICT: i32 = 3;
    /// Vacuum or a non-finite value during a run.
    pub const ABORT: i32 = 4;
}
