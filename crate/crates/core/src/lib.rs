//! Benchmark toolkit for ABAC policy mining.
//!
//! Scenarios are synthesized from a random ground-truth policy so that the
//! access matrix is consistent by construction. Candidate policies, from
//! an LLM provider or one of the built-in miners, are graded by rebuilding
//! the matrix and comparing it cell by cell.

pub mod cli;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod generator;
pub mod metrics;
pub mod miner;
pub mod model;
pub mod presets;
pub mod prompts;
pub mod provider;
pub mod scenario_files;

pub use error::{Error, Result};
