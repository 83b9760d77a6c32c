pub mod cluster;
pub mod data;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scm;
pub mod transport;

pub use error::{Error, Result};
