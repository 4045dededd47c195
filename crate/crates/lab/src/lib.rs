//! Standard-library companion of `vlreward-core`: fixture and log formats,
//! the flat configuration language, the experiment runner and summaries.
//! The `vlreward` binary wraps these behind four commands.

pub mod audit;
pub mod checkpoint;
pub mod clients;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod runner;
pub mod store;
pub mod summary;

pub use error::{LabError, LabResult};
