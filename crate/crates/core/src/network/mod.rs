//! Permutation-invariant neural estimators.
//!
//! An estimator encodes each replicate with an inner network, averages the
//! encodings over the set, appends optional expert summary statistics and
//! decodes the result with an outer network.  Averaging makes the estimate
//! invariant to replicate order and lets one trained network accept any
//! number of replicates.  A piecewise router selects among sub-estimators
//! trained at different replicate counts, and gradients are exact
//! reverse-mode so training needs no external autodiff machinery.

mod checkpoint;
mod deepsets;
mod mlp;
mod piecewise;

pub use deepsets::{DeepSetsEstimator, ExpertStats, Gradients, Workspace};
pub use mlp::{Activation, DenseLayer, Mlp};
pub use piecewise::PiecewiseEstimator;

use thiserror::Error;

/// Errors from network construction, evaluation and checkpoint IO.
#[derive(Debug, Error)]
pub enum NetworkError {
    /// Layer shapes or estimator wiring are inconsistent.
    #[error("architecture: {0}")]
    Architecture(String),
    /// An input does not match the dimensions the network was built for.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// The requested loss cannot back-propagate.
    #[error("loss: {0}")]
    Loss(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A checkpoint on disk violates the declared format.
    #[error("checkpoint format: {0}")]
    Format(String),
}
