//! Cutoff-radius molecular graphs and dataset geometry statistics.

mod build;
mod stats;

pub use build::{build_graph, enumerate_angles, Angle, Edge, MolecularGraph};
pub use stats::{geometry_stats, representation_bound, GeometryStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("atoms {i} and {j} are {d:.3e} angstrom apart; geometry is degenerate")]
    DegenerateGeometry { i: usize, j: usize, d: f64 },
    #[error("cutoff must be positive, got {0}")]
    NonPositiveCutoff(f64),
}
