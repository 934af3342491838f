//! Port selection for fluid antenna systems: spatially correlated
//! channel simulation, analytical-approximation estimation, regret-aware
//! linear prediction, and recurrent interpolation, with an outage
//! benchmarking harness on top.

pub mod aa;
pub mod bessel;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod lstm;
pub mod pipelines;
pub mod rng;
pub mod selection;
pub mod spo;

pub use error::{Error, Result};
