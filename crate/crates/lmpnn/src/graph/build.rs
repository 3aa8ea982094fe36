//! Graph construction: directed cutoff edges and angle triplets.

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::mol_io::Molecule;

/// Atom pairs closer than this are rejected rather than fed to the
/// radial basis, whose values blow up as d -> 0.
const DEGENERATE_DISTANCE: f64 = 1e-6;

/// A directed edge src -> dst with its Euclidean length.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub distance: f64,
}

/// An ordered pair of directed edges sharing a pivot: `edge_in` = (i -> j)
/// runs into the pivot j, `edge_out` = (j -> k) runs out of it, with
/// i != k. `cos_alpha` is the cosine of the angle at j between the rays
/// j -> i and j -> k. In the interaction block, `edge_out` is the edge
/// whose message the angle refines.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub edge_in: usize,
    pub edge_out: usize,
    pub cos_alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub num_nodes: usize,
    pub node_z: Vec<u8>,
    /// Sorted by (src, dst); reciprocal pairs always both present.
    pub edges: Vec<Edge>,
    /// Sorted by (edge_out, edge_in).
    pub angles: Vec<Angle>,
    /// Positions retained for differentiable re-featurization.
    pub positions: Vec<[f64; 3]>,
}

impl MolecularGraph {
    /// Destination node of every edge (edge -> node aggregation).
    pub fn node_of_edge_dst(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.dst).collect()
    }

    /// Source node of every edge (node -> edge gathering).
    pub fn node_of_edge_src(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.src).collect()
    }

    /// Target edge of every angle (angle -> edge aggregation).
    pub fn edge_of_angle_target(&self) -> Vec<usize> {
        self.angles.iter().map(|a| a.edge_out).collect()
    }

    /// Source edge of every angle (edge -> angle gathering).
    pub fn edge_of_angle_source(&self) -> Vec<usize> {
        self.angles.iter().map(|a| a.edge_in).collect()
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Build the directed cutoff graph of a molecule.
///
/// Every unordered pair strictly closer than the cutoff contributes two
/// directed edges. Edge ordering is deterministic: sorted by (src, dst).
pub fn build_graph(mol: &Molecule, cutoff: f64) -> Result<MolecularGraph, GraphError> {
    if !cutoff.is_finite() || cutoff <= 0.0 {
        return Err(GraphError::NonPositiveCutoff(cutoff));
    }
    let n = mol.num_atoms();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distance(mol.positions[i], mol.positions[j]);
            if d < DEGENERATE_DISTANCE {
                return Err(GraphError::DegenerateGeometry { i, j, d });
            }
            if d < cutoff {
                edges.push(Edge {
                    src: i,
                    dst: j,
                    distance: d,
                });
                edges.push(Edge {
                    src: j,
                    dst: i,
                    distance: d,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.src, e.dst));

    let mut graph = MolecularGraph {
        num_nodes: n,
        node_z: mol.atomic_numbers.clone(),
        edges,
        angles: Vec::new(),
        positions: mol.positions.clone(),
    };
    graph.angles = enumerate_angles(&graph);
    Ok(graph)
}

/// Enumerate angle records over ordered pairs of directed edges
/// (i -> j, j -> k) sharing pivot j, with i != k.
pub fn enumerate_angles(graph: &MolecularGraph) -> Vec<Angle> {
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); graph.num_nodes];
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); graph.num_nodes];
    for (idx, e) in graph.edges.iter().enumerate() {
        incoming[e.dst].push(idx);
        outgoing[e.src].push(idx);
    }
    let mut angles = Vec::new();
    for pivot in 0..graph.num_nodes {
        for &e_in in &incoming[pivot] {
            let i = graph.edges[e_in].src;
            for &e_out in &outgoing[pivot] {
                let k = graph.edges[e_out].dst;
                if i == k {
                    continue;
                }
                let p_i = graph.positions[i];
                let p_j = graph.positions[pivot];
                let p_k = graph.positions[k];
                let u = [p_i[0] - p_j[0], p_i[1] - p_j[1], p_i[2] - p_j[2]];
                let v = [p_k[0] - p_j[0], p_k[1] - p_j[1], p_k[2] - p_j[2]];
                let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let cos_alpha = (dot / (nu * nv)).clamp(-1.0, 1.0);
                angles.push(Angle {
                    edge_in: e_in,
                    edge_out: e_out,
                    cos_alpha,
                });
            }
        }
    }
    angles.sort_by_key(|a| (a.edge_out, a.edge_in));
    angles
}
