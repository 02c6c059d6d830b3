//! Configuration-driven runs on top of `nanopulse-core`: TOML scenarios,
//! deterministic CSV output, state checkpoints and SVG plots.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenarios;

pub use error::AppError;
pub use nanopulse_core as core;
