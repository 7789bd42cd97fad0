//! The `fern` command-line tool: dataset generation, training, evaluation,
//! basis diagnostics and bundled experiment presets.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod presets;

pub use commands::{exit_code, run, Cli};
