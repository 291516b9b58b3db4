//! Estimator training: losses, optimisation and Monte-Carlo Bayes risk.

mod adam;
mod loss;
mod risk;
mod trainer;

pub use adam::AdamState;
pub use loss::{AffineScale, LossKind, LossSpec};
pub use risk::{mc_bayes_risk, sample_replicates, ReplicateDist};
pub(crate) use risk::{pooled_risk, sorted_mean};
pub use trainer::{
    pretrain_chain, train, EpochRecord, Refresh, StopReason, TrainConfig, TrainingRun,
};

use thiserror::Error;

/// Errors raised while configuring or running training.
#[derive(Debug, Error)]
pub enum TrainError {
    /// A configuration field is out of range or inconsistent.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Assess(#[from] crate::assess::AssessError),
    /// A simulator failed while building data for one parameter draw.
    #[error("simulating data for parameter draw {index}: {source}")]
    Simulation {
        index: usize,
        source: crate::models::ModelError,
    },
    /// Training risk left the finite range; the run cannot continue.
    #[error("training diverged at epoch {epoch}: risk {risk}")]
    Diverged { epoch: usize, risk: f64 },
}
