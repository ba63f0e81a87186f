//! Campaign orchestration around the core search engine: strict TOML
//! configuration, a deterministic worker pool with a resumable outcome log,
//! and report emission in both machine and human formats.

pub mod campaign;
pub mod config;
