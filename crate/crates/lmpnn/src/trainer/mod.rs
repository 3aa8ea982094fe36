//! Training loop, learning-rate schedule, early stopping, metric
//! logging, gamma-ratio tracking, and evaluation.

mod config;
mod eval;
mod log;
mod run;
mod schedule;

pub use config::{SplitSpec, TrainConfig};
pub use eval::{evaluate_checkpoint, evaluate_params, target_units, EvalReport, TargetUnits};
pub use log::{EpochRecord, TrainLog, TrainSummary};
pub use run::{md_energy_training, train, Standardizer, TrainOutcome};
pub use schedule::{lr_at_epoch, EarlyStopping};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm:.3e})"
    )]
    NonFiniteLoss {
        epoch: u32,
        batch: usize,
        param_norm: f64,
    },
    #[error("molecule {id} is missing target '{target}'")]
    MissingTarget { id: String, target: String },
    #[error("{which} split is empty")]
    EmptySplit { which: &'static str },
    #[error("no unit mapping for target '{target}'")]
    UnknownTargetUnit { target: String },
    #[error(transparent)]
    Data(#[from] crate::mol_io::DataError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Checkpoint(#[from] crate::tensor::CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
