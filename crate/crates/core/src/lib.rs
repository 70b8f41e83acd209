//! Transfer-entropy causality graphs and CNN + GNN forecasting for
//! multivariate time series.
//!
//! The pipeline: [`data`] loads, scales and windows a series; [`causality`]
//! estimates pairwise net transfer entropy and thresholds it into a directed
//! adjacency; [`model`] extracts multi-kernel convolutional features per
//! variable and propagates them over that graph; [`train`] fits the model with
//! an L1 loss and Adam and reports MAE/RAE/CORR.

pub mod autodiff;
pub mod causality;
pub mod cli;
pub mod data;
pub mod model;
pub mod synthetic;
pub mod train;
pub mod error;

pub use error::{Error, Result};
