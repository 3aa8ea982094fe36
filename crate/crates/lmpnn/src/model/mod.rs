//! The dual-branched network: embedding block, interaction blocks,
//! output blocks (message-passing branch), single-body blocks (discrete
//! branch), scalar gates, readout, and force prediction.

mod audit;
mod config;
mod forward;
mod params;

pub use audit::{gradient_audit, AuditReport, GRADCHECK_FLOOR};
pub use config::ModelConfig;
pub use forward::{
    evaluate, featurize, forward, predict_forces, radial_table, FeaturizedBatch, ForwardHandles,
    ForwardOutput, GeometryPath, Mode,
};
pub use params::{describe, init_params, sample_gamma, GammaRegistry, ModelParams, ParamCensus};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no embedding row for atomic number {z}")]
    MissingEmbedding { z: u8 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Basis(#[from] crate::basis::BasisError),
}
