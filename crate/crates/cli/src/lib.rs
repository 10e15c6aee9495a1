//! Command-line front end: model files in, JSON reports out.

pub mod category;
pub mod commands;
pub mod error;
pub mod model;
pub mod output;

pub use commands::{execute, Execution};
