//! Constrained sentence sampling with tree-search enhanced Metropolis-Hastings.

pub mod error;
pub mod lm;
pub mod logic;
pub mod partition;
pub mod proposal;
pub mod report;
pub mod sampler;
pub mod soft;
pub mod target;
pub mod task;
pub mod template;
pub mod vocab;

pub use error::{Error, ErrorClass, Result};
