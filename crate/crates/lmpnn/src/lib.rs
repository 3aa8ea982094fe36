//! Dual-branched Legendre message-passing network for molecular property
//! prediction.
//!
//! The library covers the full pipeline at desk scale:
//!
//! - [`mol_io`]: extended-XYZ ingestion (QM9-style and MD trajectories),
//!   energy unit conversion, dataset splits.
//! - [`basis`]: Legendre rational functions (radial) and Legendre
//!   polynomials of the first kind (angular), plus Gauss-Legendre
//!   quadrature for orthogonality checks.
//! - [`graph`]: cutoff-radius molecular graphs with directed edges and
//!   angle triplets, and dataset geometry statistics.
//! - [`tensor`]: a minimal reverse-mode differentiation engine (tape,
//!   dense/segment ops, Adam, dropout, checkpoints, finite-difference
//!   auditing).
//! - [`model`]: the dual-branched network itself - embedding block,
//!   interaction blocks, output blocks, single-body blocks, trainable
//!   scalar gates, readout, and force prediction.
//! - [`trainer`]: training loop with stepwise learning-rate decay, early
//!   stopping, gamma-ratio tracking, and MAE evaluation.
//! - [`synthetic`]: deterministic molecule fixtures for audits and
//!   desk-scale runs.

pub mod basis;
pub mod graph;
pub mod model;
pub mod mol_io;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
