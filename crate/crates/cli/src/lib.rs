//! Experiment runner and acceptance suite for the `firing_vq` library.

pub mod config;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod suite;
