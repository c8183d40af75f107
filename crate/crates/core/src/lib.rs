pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod report;
pub mod scenario;
pub mod tensor;
pub mod trajectory;

pub use error::{Error, Result};
