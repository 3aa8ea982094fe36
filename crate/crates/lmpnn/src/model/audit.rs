//! Finite-difference audit of the full-model gradients.
//!
//! The oracle route re-runs whole forward passes on perturbed inputs and
//! never touches the tape's backward machinery, so the two sides of the
//! comparison stay independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ModelConfig;
use super::forward::{featurize, forward, radial_table, GeometryPath, Mode};
use super::params::ModelParams;
use super::ModelError;
use crate::graph::MolecularGraph;
use crate::tensor::gradcheck::relative_error;

/// Near-zero floor for relative-error comparisons; below it the check
/// degrades to an absolute tolerance of floor * rtol.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub num_atoms: usize,
    pub params_checked: usize,
    pub max_param_rel_error: f64,
    pub worst_param: String,
    pub max_force_rel_error: f64,
    /// Net force vector; translation invariance forces it to zero.
    pub force_sum: [f64; 3],
    pub forces: Vec<[f64; 3]>,
}

/// Compare analytic gradients of y_hat against central finite
/// differences, for a sampled subset of each parameter tensor (scalars
/// are always fully checked) and for every atom coordinate.
pub fn gradient_audit(
    graph: &MolecularGraph,
    params: &ModelParams,
    config: &ModelConfig,
    samples_per_tensor: usize,
    eps: f64,
    seed: u64,
) -> Result<AuditReport, ModelError> {
    let table = radial_table(config)?;
    let batch = featurize(&[graph], params, config, &table)?;

    // Analytic pass: one forward + backward gives parameter and position
    // gradients together.
    let (mut tape, handles) = forward(
        params,
        config,
        &batch,
        Mode::Eval,
        GeometryPath::Differentiable,
        0,
    )?;
    let grads = tape.backward(handles.y_hat)?;
    let flat_analytic = handles.binding.collect_flat_grads(&params.store, &grads);
    let pos_analytic = grads
        .get(handles.positions.expect("differentiable path"))
        .map(|g| g.to_vec())
        .unwrap_or_else(|| vec![0.0; batch.positions.len()]);

    // Finite differences over sampled parameter coordinates.
    let mut probe = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_param_rel_error = 0.0f64;
    let mut worst_param = String::new();
    let mut params_checked = 0usize;
    let entries: Vec<_> = params.store.entries().to_vec();
    for entry in &entries {
        let len = entry.shape.len();
        let picks: Vec<usize> = if len <= samples_per_tensor {
            (0..len).collect()
        } else {
            (0..samples_per_tensor)
                .map(|_| rng.random_range(0..len))
                .collect()
        };
        for local in picks {
            let flat_idx = entry.offset + local;
            let original = probe.store.data()[flat_idx];
            probe.store.data_mut()[flat_idx] = original + eps;
            let hi = eval_y(&probe, config, &batch)?;
            probe.store.data_mut()[flat_idx] = original - eps;
            let lo = eval_y(&probe, config, &batch)?;
            probe.store.data_mut()[flat_idx] = original;
            let fd = (hi - lo) / (2.0 * eps);
            let rel = relative_error(flat_analytic[flat_idx], fd, GRADCHECK_FLOOR);
            params_checked += 1;
            if rel > max_param_rel_error {
                max_param_rel_error = rel;
                worst_param = format!("{}[{}]", entry.name, local);
            }
        }
    }

    // Finite differences over every atom coordinate; featurization is
    // re-recorded on the tape from the perturbed positions.
    let mut max_force_rel_error = 0.0f64;
    let mut positions = batch.positions.clone();
    for i in 0..positions.len() {
        let original = positions[i];
        positions[i] = original + eps;
        let hi = eval_y_at(params, config, &batch, &positions)?;
        positions[i] = original - eps;
        let lo = eval_y_at(params, config, &batch, &positions)?;
        positions[i] = original;
        let fd = (hi - lo) / (2.0 * eps);
        let rel = relative_error(pos_analytic[i], fd, GRADCHECK_FLOOR);
        max_force_rel_error = max_force_rel_error.max(rel);
    }

    let mut force_sum = [0.0f64; 3];
    let mut forces = vec![[0.0f64; 3]; graph.num_nodes];
    for (i, f) in forces.iter_mut().enumerate() {
        for c in 0..3 {
            f[c] = -pos_analytic[i * 3 + c];
            force_sum[c] += f[c];
        }
    }

    Ok(AuditReport {
        num_atoms: graph.num_nodes,
        params_checked,
        max_param_rel_error,
        worst_param,
        max_force_rel_error,
        force_sum,
        forces,
    })
}

fn eval_y(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &super::forward::FeaturizedBatch,
) -> Result<f64, ModelError> {
    let (tape, handles) = forward(
        params,
        config,
        batch,
        Mode::Eval,
        GeometryPath::Precomputed,
        0,
    )?;
    Ok(tape.values(handles.y_hat)[0])
}

fn eval_y_at(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &super::forward::FeaturizedBatch,
    positions: &[f64],
) -> Result<f64, ModelError> {
    let mut shifted = super::forward::FeaturizedBatch {
        num_nodes: batch.num_nodes,
        num_molecules: batch.num_molecules,
        num_edges: batch.num_edges,
        num_angles: batch.num_angles,
        node_rows: batch.node_rows.clone(),
        mol_of_node: batch.mol_of_node.clone(),
        edge_src: batch.edge_src.clone(),
        edge_dst: batch.edge_dst.clone(),
        angle_src_edge: batch.angle_src_edge.clone(),
        angle_tgt_edge: batch.angle_tgt_edge.clone(),
        radial: batch.radial.clone(),
        angular: batch.angular.clone(),
        positions: positions.to_vec(),
        edge_ends: batch.edge_ends.clone(),
        angle_triplets: batch.angle_triplets.clone(),
    };
    let (tape, handles) = forward(
        params,
        config,
        &shifted,
        Mode::Eval,
        GeometryPath::Differentiable,
        0,
    )?;
    let y = tape.values(handles.y_hat)[0];
    shifted.positions.clear();
    Ok(y)
}
