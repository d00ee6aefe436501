//! Soft vector quantization with multiple firing events.
//!
//! A network of `m` neurons encodes an input `x` by firing `n` times, each
//! firing drawn from a posterior `Pr(y|x)`. The decoder reconstructs `x` from
//! the firing vector and the cost is the expected squared reconstruction
//! error. The crate evaluates this cost and its upper bound `D1 + D2`, solves
//! the stationarity conditions for the codebook, trains topographic maps, and
//! provides closed-form reference solutions.

pub mod analytic;
pub mod error;
pub mod model;
pub mod objective;
pub mod stationarity;
pub mod topomap;

pub use error::{Error, Result};
