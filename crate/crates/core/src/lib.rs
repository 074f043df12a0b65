//! Bayesian inference for exponential random graph models with the
//! approximate exchange algorithm, its adaptive population variants and
//! delayed-rejection extensions.

pub mod adapt;
pub mod commands;
pub mod config;
pub mod data;
pub mod delayed_rejection;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod graph;
pub mod model;
pub mod samplers;
pub mod statistics;

pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{GaussianPrior, ModelSpec};
pub use statistics::Statistic;
