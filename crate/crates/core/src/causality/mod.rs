//! Transfer-entropy causality between the variables of a multivariate series.
//!
//! Each variable is discretized with equal-width histogram bins, pairwise
//! transfer entropies are estimated from empirical joint frequencies, and the
//! antisymmetric net transfer entropy is thresholded into a directed graph.

mod discretize;
mod entropy;
mod matrix;

pub use discretize::{Binning, DiscretizedSeries};
pub use entropy::{conditional_entropy, entropy, net_transfer_entropy, transfer_entropy};
pub use matrix::{
    build_causality_matrix, causality_from_columns, CausalityConfig, CausalityMatrix, DEFAULT_BINS,
    DEFAULT_THRESHOLD,
};
