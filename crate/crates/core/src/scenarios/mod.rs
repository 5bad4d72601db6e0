//! Synthetic designs, competing weighting schemes and the Monte-Carlo evaluation harness.

mod experiment;
mod generate;
mod metrics;
mod weights;

pub use experiment::*;
pub use generate::*;
pub use metrics::*;
pub use weights::*;
