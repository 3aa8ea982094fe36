//! Pooled pair-distance statistics over a dataset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mol_io::Molecule;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryStats {
    /// Mean over all intra-molecular unordered atom pairs, angstrom.
    pub mean_pair_distance: f64,
    /// Fraction of pairs closer than each requested cutoff, keyed by the
    /// cutoff formatted with one decimal.
    pub fraction_within: BTreeMap<String, f64>,
    pub pair_count: u64,
}

fn cutoff_key(c: f64) -> String {
    format!("{c:.1}")
}

impl GeometryStats {
    pub fn fraction(&self, cutoff: f64) -> Option<f64> {
        self.fraction_within.get(&cutoff_key(cutoff)).copied()
    }
}

/// Pool all intra-molecular unordered pairs across the dataset and report
/// their mean distance plus, for each cutoff, the fraction of pairs
/// strictly closer than it.
pub fn geometry_stats(dataset: &[Molecule], cutoffs: &[f64]) -> GeometryStats {
    let mut count: u64 = 0;
    let mut sum = 0.0f64;
    let mut within = vec![0u64; cutoffs.len()];
    for mol in dataset {
        let n = mol.num_atoms();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = mol.positions[i][0] - mol.positions[j][0];
                let dy = mol.positions[i][1] - mol.positions[j][1];
                let dz = mol.positions[i][2] - mol.positions[j][2];
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                count += 1;
                sum += d;
                for (c_idx, &c) in cutoffs.iter().enumerate() {
                    if d < c {
                        within[c_idx] += 1;
                    }
                }
            }
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let fraction_within = cutoffs
        .iter()
        .zip(within.iter())
        .map(|(&c, &w)| {
            let f = if count > 0 { w as f64 / count as f64 } else { 0.0 };
            (cutoff_key(c), f)
        })
        .collect();
    GeometryStats {
        mean_pair_distance: mean,
        fraction_within,
        pair_count: count,
    }
}

/// Upper bound on the number of node, edge, and angle representations of
/// a molecule with `num_atoms` atoms:
/// V + V(V-1)/2 + V(V-1)(V-2)/6.
pub fn representation_bound(num_atoms: u64) -> u64 {
    let v = num_atoms;
    v + v * (v.saturating_sub(1)) / 2 + v * v.saturating_sub(1) * v.saturating_sub(2) / 6
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap as Map;

    #[test]
    fn representation_bound_small_values() {
        assert_eq!(representation_bound(1), 1);
        assert_eq!(representation_bound(2), 3);
        assert_eq!(representation_bound(3), 7);
        assert_eq!(representation_bound(29), 29 + 406 + 3654);
    }

    #[test]
    fn single_pair_stats() {
        let mol = Molecule {
            id: "m".into(),
            atomic_numbers: vec![1, 1],
            positions: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            targets: Map::new(),
            forces: None,
        };
        let stats = geometry_stats(&[mol], &[4.0]);
        assert_eq!(stats.pair_count, 1);
        assert!((stats.mean_pair_distance - 1.0).abs() < 1e-15);
        assert!((stats.fraction(4.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fractions_nondecreasing_in_cutoff() {
        let mol = Molecule {
            id: "m".into(),
            atomic_numbers: vec![6; 5],
            positions: vec![
                [0.0, 0.0, 0.0],
                [1.5, 0.0, 0.0],
                [3.0, 1.0, 0.0],
                [6.0, 0.0, 2.0],
                [9.0, 3.0, 1.0],
            ],
            targets: Map::new(),
            forces: None,
        };
        let stats = geometry_stats(&[mol], &[2.0, 4.0, 6.0, 12.0]);
        let f: Vec<f64> = [2.0, 4.0, 6.0, 12.0]
            .iter()
            .map(|&c| stats.fraction(c).unwrap())
            .collect();
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
        assert!(f.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((f[3] - 1.0).abs() < 1e-15);
    }
}
