pub mod baselines;
pub mod error;
pub mod estimator;
pub mod gnp;
pub mod roots;
pub mod simulation;
pub mod special_math;
pub mod types;

pub use error::{Error, Result};
pub use types::{GlobalTestOutcome, Method, Sides, TestStatistics};
