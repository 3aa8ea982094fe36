//! Forward pass of the dual-branched network.
//!
//! Dataflow per batch: the embedding block turns atom types and incoming
//! distance filters into per-atom features X. The message-passing branch
//! lifts X onto directed edges and alternates interaction blocks
//! (three-body refinement over shared-pivot angles) with output blocks
//! (two-body readout taps); every output block contributes a per-atom
//! scalar. The discrete branch stacks single-body blocks on X with no
//! geometric input. The prediction is
//! c_single * single_branch + c_passing * passing_branch.

use std::rc::Rc;

use super::config::ModelConfig;
use super::params::ModelParams;
use super::ModelError;
use crate::basis::{expand_angle_cosine, RadialBasisConfig, RadialBasisTable};
use crate::graph::MolecularGraph;
use crate::tensor::{Activation, Shape, Tape, TapeBinding, TensorId};

/// Geometry and index arrays of one packed batch of molecules.
///
/// Node, edge, and angle arrays of the member graphs are concatenated
/// with offset-adjusted indices; `mol_of_node` identifies each node's
/// molecule for the readout sum.
pub struct FeaturizedBatch {
    pub num_nodes: usize,
    pub num_molecules: usize,
    pub num_edges: usize,
    pub num_angles: usize,
    /// Embedding-table row per node.
    pub node_rows: Rc<Vec<usize>>,
    pub mol_of_node: Rc<Vec<usize>>,
    pub edge_src: Rc<Vec<usize>>,
    pub edge_dst: Rc<Vec<usize>>,
    pub angle_src_edge: Rc<Vec<usize>>,
    pub angle_tgt_edge: Rc<Vec<usize>>,
    /// Precomputed radial expansions, row-major [E, n].
    pub radial: Vec<f64>,
    /// Precomputed angular expansions, row-major [A, m].
    pub angular: Vec<f64>,
    /// Flat positions [V, 3] for the differentiable path.
    pub positions: Vec<f64>,
    pub edge_ends: Rc<Vec<(usize, usize)>>,
    /// (i, j, k) with pivot j for each angle.
    pub angle_triplets: Rc<Vec<(usize, usize, usize)>>,
}

/// Build the radial table a model configuration implies.
pub fn radial_table(config: &ModelConfig) -> Result<RadialBasisTable, ModelError> {
    Ok(RadialBasisTable::new(RadialBasisConfig {
        num_functions: config.radial_functions,
        cutoff: config.cutoff,
        normalization_grid_points: config.normalization_grid_points,
    })?)
}

/// Pack graphs into one batch and precompute basis expansions.
pub fn featurize(
    graphs: &[&MolecularGraph],
    params: &ModelParams,
    config: &ModelConfig,
    table: &RadialBasisTable,
) -> Result<FeaturizedBatch, ModelError> {
    let mut node_rows = Vec::new();
    let mut mol_of_node = Vec::new();
    let mut edge_src = Vec::new();
    let mut edge_dst = Vec::new();
    let mut edge_ends = Vec::new();
    let mut angle_src_edge = Vec::new();
    let mut angle_tgt_edge = Vec::new();
    let mut angle_triplets = Vec::new();
    let mut radial = Vec::new();
    let mut angular = Vec::new();
    let mut positions = Vec::new();

    let mut node_offset = 0usize;
    let mut edge_offset = 0usize;
    for (mol_idx, g) in graphs.iter().enumerate() {
        for &z in &g.node_z {
            node_rows.push(params.element_row(z)?);
            mol_of_node.push(mol_idx);
        }
        for p in &g.positions {
            positions.extend_from_slice(p);
        }
        for e in &g.edges {
            edge_src.push(node_offset + e.src);
            edge_dst.push(node_offset + e.dst);
            edge_ends.push((node_offset + e.src, node_offset + e.dst));
            radial.extend_from_slice(&table.expand(e.distance)?);
        }
        for a in &g.angles {
            angle_src_edge.push(edge_offset + a.edge_in);
            angle_tgt_edge.push(edge_offset + a.edge_out);
            let e_in = &g.edges[a.edge_in];
            let e_out = &g.edges[a.edge_out];
            angle_triplets.push((
                node_offset + e_in.src,
                node_offset + e_in.dst,
                node_offset + e_out.dst,
            ));
            angular.extend_from_slice(&expand_angle_cosine(
                a.cos_alpha,
                &crate::basis::AngularBasisConfig {
                    num_functions: config.angular_functions,
                },
            ));
        }
        node_offset += g.num_nodes;
        edge_offset += g.edges.len();
    }

    Ok(FeaturizedBatch {
        num_nodes: node_offset,
        num_molecules: graphs.len(),
        num_edges: edge_src.len(),
        num_angles: angle_src_edge.len(),
        node_rows: Rc::new(node_rows),
        mol_of_node: Rc::new(mol_of_node),
        edge_src: Rc::new(edge_src),
        edge_dst: Rc::new(edge_dst),
        angle_src_edge: Rc::new(angle_src_edge),
        angle_tgt_edge: Rc::new(angle_tgt_edge),
        radial,
        angular,
        positions,
        edge_ends: Rc::new(edge_ends),
        angle_triplets: Rc::new(angle_triplets),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// How geometry enters the tape.
#[derive(Copy, Clone, Debug)]
pub enum GeometryPath {
    /// Distances, cosines, and expansions are fixed inputs; gradients
    /// reach parameters only.
    Precomputed,
    /// Positions are gradient-carrying leaves and featurization is
    /// recorded on the tape, so the prediction can be differentiated
    /// with respect to atom coordinates.
    Differentiable,
}

/// Tape handles of one recorded forward pass.
pub struct ForwardHandles {
    pub y_hat: TensorId,
    pub single_branch: TensorId,
    pub passing_branch: TensorId,
    /// Per-atom contribution of each output block, [V,1] each.
    pub per_block_contrib: Vec<TensorId>,
    /// Embedding-block output X, [V,F].
    pub x_features: TensorId,
    /// Present on the differentiable path.
    pub positions: Option<TensorId>,
    pub binding: TapeBinding,
}

/// Extracted forward values.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Prediction per molecule.
    pub y_hat: Vec<f64>,
    /// Branch readouts per molecule before coefficient weighting.
    pub single_contribution: Vec<f64>,
    pub passing_contribution: Vec<f64>,
    pub c_single: f64,
    pub c_passing: f64,
    /// Combined per-atom contributions, when requested.
    pub per_atom: Option<Vec<f64>>,
}

struct DropoutCtx {
    rate: f64,
    training: bool,
    seed: u64,
    counter: u64,
}

impl DropoutCtx {
    fn apply(&mut self, tape: &mut Tape, x: TensorId) -> Result<TensorId, ModelError> {
        let seed = self.seed.wrapping_add(self.counter);
        self.counter += 1;
        Ok(tape.dropout(x, self.rate, self.training, seed)?)
    }
}

fn dense_by_name(
    tape: &mut Tape,
    binding: &TapeBinding,
    prefix: &str,
    x: TensorId,
    act: Activation,
) -> Result<TensorId, ModelError> {
    let w = binding.id(&format!("{prefix}.w"))?;
    let b = binding.id(&format!("{prefix}.b"))?;
    Ok(tape.dense(x, w, b, act)?)
}

/// Record a forward pass on a fresh tape.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &FeaturizedBatch,
    mode: Mode,
    geometry: GeometryPath,
    dropout_seed: u64,
) -> Result<(Tape, ForwardHandles), ModelError> {
    config.validate()?;
    let act = config.activation;
    let f = config.hidden_width;
    let n = config.radial_functions;
    let m = config.angular_functions;
    let (v_count, e_count, a_count) = (batch.num_nodes, batch.num_edges, batch.num_angles);

    let mut tape = Tape::new();
    let binding = params.store.bind_all(&mut tape)?;
    let mut dropout = DropoutCtx {
        rate: config.dropout_rate,
        training: mode == Mode::Train,
        seed: dropout_seed,
        counter: 0,
    };

    // Geometry features.
    let (radial, angular, positions) = match geometry {
        GeometryPath::Precomputed => {
            let r = tape.constant(Shape::new(e_count, n), batch.radial.clone())?;
            let q = tape.constant(Shape::new(a_count, m), batch.angular.clone())?;
            (r, q, None)
        }
        GeometryPath::Differentiable => {
            let pos = tape.leaf(Shape::new(v_count, 3), batch.positions.clone(), true)?;
            let d = tape.distances(pos, batch.edge_ends.clone())?;
            let table = Rc::new(radial_table(config)?);
            let r = tape.radial_basis(d, table)?;
            let cos = tape.cos_angles(pos, batch.angle_triplets.clone())?;
            let q = tape.angular_basis(cos, m)?;
            (r, q, Some(pos))
        }
    };

    // Embedding block: per-atom features from atom types plus
    // distance-filtered neighbor types.
    let emb_table = binding.id("embedding.weight")?;
    let emb = tape.gather(emb_table, batch.node_rows.clone())?;
    let filter = dense_by_name(&mut tape, &binding, "embed.filter", radial, act)?;
    let src_emb = tape.gather(emb, batch.edge_src.clone())?;
    let weighted = tape.mul(src_emb, filter)?;
    let aggregated = tape.segment_sum(weighted, batch.edge_dst.clone(), v_count)?;
    let cat = tape.concat_cols(emb, aggregated)?;
    let x = dense_by_name(&mut tape, &binding, "embed.combine", cat, act)?;

    // Message-passing branch: edge features seeded from the sender atom,
    // refined by interaction blocks, tapped by output blocks.
    let mut edge_feat = tape.gather(x, batch.edge_src.clone())?;
    let mut passing_atoms: Option<TensorId> = None;
    let mut per_block_contrib = Vec::with_capacity(config.num_output_blocks);
    let stages = config
        .num_output_blocks
        .max(config.num_interaction_blocks + 1);
    for t in 0..stages {
        if t > 0 && t - 1 < config.num_interaction_blocks {
            edge_feat = interaction_block(
                &mut tape,
                &binding,
                t - 1,
                edge_feat,
                radial,
                angular,
                batch,
                e_count,
                act,
                &mut dropout,
            )?;
        }
        if t < config.num_output_blocks {
            let (contrib, carried) = output_block(
                &mut tape,
                &binding,
                t,
                edge_feat,
                radial,
                batch,
                v_count,
                act,
                &mut dropout,
            )?;
            per_block_contrib.push(contrib);
            passing_atoms = Some(match passing_atoms {
                None => contrib,
                Some(acc) => tape.add(acc, contrib)?,
            });
            edge_feat = carried;
        }
    }
    let passing_atoms = passing_atoms.expect("at least one output block");
    let passing_branch =
        tape.segment_sum(passing_atoms, batch.mol_of_node.clone(), batch.num_molecules)?;

    // Discrete branch: single-body blocks on X, no geometric input.
    let mut s = x;
    for t in 0..config.num_single_blocks {
        s = single_body_block(&mut tape, &binding, t, s, act, &mut dropout)?;
    }
    let single_atoms = dense_by_name(&mut tape, &binding, "single.project", s, Activation::Identity)?;
    let single_branch =
        tape.segment_sum(single_atoms, batch.mol_of_node.clone(), batch.num_molecules)?;

    // Weighted aggregation of the two branch outputs.
    let c_single = binding.id("branch.c_single")?;
    let c_passing = binding.id("branch.c_passing")?;
    let weighted_single = tape.scale_by_scalar(single_branch, c_single)?;
    let weighted_passing = tape.scale_by_scalar(passing_branch, c_passing)?;
    let y_hat = tape.add(weighted_single, weighted_passing)?;

    let _ = f;
    Ok((
        tape,
        ForwardHandles {
            y_hat,
            single_branch,
            passing_branch,
            per_block_contrib,
            x_features: x,
            positions,
            binding,
        },
    ))
}

/// Three-body refinement of directed-edge features. For each target edge
/// (j -> i), messages from edges (k -> j) arriving at its source are
/// filtered by the angle expansion and summed, gated by the radial
/// filter, combined with a transformed self term, and added back through
/// a gated residual.
#[allow(clippy::too_many_arguments)]
fn interaction_block(
    tape: &mut Tape,
    binding: &TapeBinding,
    t: usize,
    edge_feat: TensorId,
    radial: TensorId,
    angular: TensorId,
    batch: &FeaturizedBatch,
    e_count: usize,
    act: Activation,
    dropout: &mut DropoutCtx,
) -> Result<TensorId, ModelError> {
    let p = |s: &str| format!("interaction.{t}.{s}");
    // Dense on edge features commutes with the gather onto angles; doing
    // it first keeps the big matmul at edge rather than angle count.
    let transformed = dense_by_name(tape, binding, &p("source"), edge_feat, act)?;
    let gathered = tape.gather(transformed, batch.angle_src_edge.clone())?;
    let angle_filter = dense_by_name(tape, binding, &p("angular"), angular, act)?;
    let messages = tape.mul(gathered, angle_filter)?;
    let aggregated = tape.segment_sum(messages, batch.angle_tgt_edge.clone(), e_count)?;
    let radial_filter = dense_by_name(tape, binding, &p("radial"), radial, act)?;
    let gated = tape.mul(aggregated, radial_filter)?;
    let self_term = dense_by_name(tape, binding, &p("self"), edge_feat, act)?;
    let combined = tape.add(gated, self_term)?;
    let combined = dropout.apply(tape, combined)?;
    let out = dense_by_name(tape, binding, &p("out"), combined, act)?;
    let gamma = binding.id(&p("gamma"))?;
    let gated_out = tape.scale_by_scalar(out, gamma)?;
    Ok(tape.add(edge_feat, gated_out)?)
}

/// Two-body readout tap: edge features gated by the radial filter are
/// pooled onto destination atoms and projected to a per-atom scalar
/// through the block's gate. Carries edge features forward additively.
#[allow(clippy::too_many_arguments)]
fn output_block(
    tape: &mut Tape,
    binding: &TapeBinding,
    t: usize,
    edge_feat: TensorId,
    radial: TensorId,
    batch: &FeaturizedBatch,
    v_count: usize,
    act: Activation,
    dropout: &mut DropoutCtx,
) -> Result<(TensorId, TensorId), ModelError> {
    let p = |s: &str| format!("output.{t}.{s}");
    let radial_filter = dense_by_name(tape, binding, &p("radial"), radial, act)?;
    let gated = tape.mul(edge_feat, radial_filter)?;
    let carried = tape.add(edge_feat, gated)?;
    let pooled = tape.segment_sum(gated, batch.edge_dst.clone(), v_count)?;
    let hidden = dense_by_name(tape, binding, &p("hidden"), pooled, act)?;
    let hidden = dropout.apply(tape, hidden)?;
    let projected = dense_by_name(tape, binding, &p("project"), hidden, Activation::Identity)?;
    let gamma = binding.id(&p("gamma"))?;
    let contrib = tape.scale_by_scalar(projected, gamma)?;
    Ok((contrib, carried))
}

/// Per-atom dense stack with a gated final layer and identity residual.
fn single_body_block(
    tape: &mut Tape,
    binding: &TapeBinding,
    t: usize,
    x: TensorId,
    act: Activation,
    dropout: &mut DropoutCtx,
) -> Result<TensorId, ModelError> {
    let p = |s: &str| format!("single.{t}.{s}");
    let h1 = dense_by_name(tape, binding, &p("dense1"), x, act)?;
    let h1 = dropout.apply(tape, h1)?;
    let h2 = dense_by_name(tape, binding, &p("dense2"), h1, act)?;
    let gamma = binding.id(&p("gamma"))?;
    let gated = tape.scale_by_scalar(h2, gamma)?;
    Ok(tape.add(x, gated)?)
}

/// Run a forward pass and extract values.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &FeaturizedBatch,
    with_per_atom: bool,
) -> Result<ForwardOutput, ModelError> {
    let (tape, handles) = forward(
        params,
        config,
        batch,
        Mode::Eval,
        GeometryPath::Precomputed,
        0,
    )?;
    let c_single = params.store.scalar("branch.c_single")?;
    let c_passing = params.store.scalar("branch.c_passing")?;
    let per_atom = if with_per_atom {
        let mut acc = vec![0.0; batch.num_nodes];
        for &contrib in &handles.per_block_contrib {
            for (a, v) in acc.iter_mut().zip(tape.values(contrib)) {
                *a += c_passing * v;
            }
        }
        Some(acc)
    } else {
        None
    };
    Ok(ForwardOutput {
        y_hat: tape.values(handles.y_hat).to_vec(),
        single_contribution: tape.values(handles.single_branch).to_vec(),
        passing_contribution: tape.values(handles.passing_branch).to_vec(),
        c_single,
        c_passing,
        per_atom,
    })
}

/// Predicted forces: F_i = -d y_hat / d p_i for one molecule.
pub fn predict_forces(
    graph: &MolecularGraph,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Vec<[f64; 3]>, ModelError> {
    let table = radial_table(config)?;
    let batch = featurize(&[graph], params, config, &table)?;
    let (mut tape, handles) = forward(
        params,
        config,
        &batch,
        Mode::Eval,
        GeometryPath::Differentiable,
        0,
    )?;
    let grads = tape.backward(handles.y_hat)?;
    let pos = handles.positions.expect("differentiable path");
    let mut forces = vec![[0.0f64; 3]; graph.num_nodes];
    if let Some(g) = grads.get(pos) {
        for (i, force) in forces.iter_mut().enumerate() {
            for c in 0..3 {
                force[c] = -g[i * 3 + c];
            }
        }
    }
    Ok(forces)
}
