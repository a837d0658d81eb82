pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod llm;
pub mod model;
pub mod prompt;
pub mod records;
pub mod report;
pub mod sampler;
pub mod segment;
pub mod tools;
pub mod truth;
pub mod vote;

pub use error::{Error, Result};
