//! Minimal reverse-mode differentiation engine.
//!
//! Exactly the operations the model needs: fused dense layers, segment
//! sums, gathers, scalar gates, geometric featurization ops whose
//! gradients flow back to atom positions, dropout, and Adam. 64-bit
//! floats throughout. A tape is confined to one forward pass and is
//! consumed by `backward`.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod matmul;
mod params;
mod tape;

pub use adam::AdamState;
pub use checkpoint::{
    load_checkpoint, save_checkpoint, AdamMeta, Checkpoint, CheckpointError, CheckpointManifest,
    ParamMeta,
};
pub use matmul::{set_single_threaded, single_threaded};
pub use params::{ParamEntry, ParamStore, TapeBinding};
pub use tape::{Activation, Gradients, Shape, Tape, TensorId};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("segment id {id} out of range for {num_segments} segments")]
    SegmentIdOutOfRange { id: usize, num_segments: usize },
    #[error("row index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("backward requires a scalar loss, got shape {shape}")]
    NonScalarLoss { shape: Shape },
    #[error("dropout rate must be in [0, 1), got {rate}")]
    InvalidDropoutRate { rate: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter '{name}' registered twice")]
    DuplicateParam { name: String },
    #[error("unknown parameter '{name}'")]
    UnknownParam { name: String },
    #[error("basis evaluation failed: {0}")]
    Basis(String),
}
