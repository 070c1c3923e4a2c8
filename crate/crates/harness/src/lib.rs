//! Experiment runner for dynamic network sampling on stochastic block models.
//!
//! Three workloads sit on top of [`dynsample_core`]: Chernoff-information
//! curves for a block model, Monte Carlo comparisons of uniform and
//! Chernoff-optimal sampling on simulated graphs, and the same comparison
//! on an edge-list graph with a paired Wilcoxon signed-rank test.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;
pub mod wilcoxon;

pub use error::{HarnessError, Result};
