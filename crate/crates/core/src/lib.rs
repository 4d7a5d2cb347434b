pub mod error;
pub mod rng;
pub mod series;
pub mod decompose;
pub(crate) mod linalg;
pub mod stats;
pub mod arima;
pub mod lstm;
pub mod gbt;
pub mod metrics;
pub mod pipeline;
pub mod cli;
