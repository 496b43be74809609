//! Coreference resolution for long literary documents.

pub mod error;
pub mod gender;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pairs;
pub mod pipeline;
pub mod resolver;
pub mod detector;
pub mod text;

pub use error::{Error, Result};
