//! File-backed assurance-case engine with evidence-generating techniques
//! for test-data quality.

pub mod ac_model;
pub mod audit;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod reports;
pub mod store;
pub mod techniques;

pub use error::{Error, Result};
