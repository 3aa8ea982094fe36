//! Shared helpers for integration tests.
#![allow(dead_code)]

use rand::Rng;

use lmpnn::mol_io::Molecule;

/// Rotation matrix from a random axis and angle (Rodrigues form).
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let axis = {
        let v = [
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0f64),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    let t = 1.0 - c;
    let (x, y, z) = (axis[0], axis[1], axis[2]);
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn apply_rotation(m: &[[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// Rigid motion of a molecule: rotate then translate every position.
pub fn transform_molecule(mol: &Molecule, rot: &[[f64; 3]; 3], shift: [f64; 3]) -> Molecule {
    let mut out = mol.clone();
    out.positions = mol
        .positions
        .iter()
        .map(|&p| {
            let r = apply_rotation(rot, p);
            [r[0] + shift[0], r[1] + shift[1], r[2] + shift[2]]
        })
        .collect();
    out
}

/// Relabel atoms by a permutation: new index `i` holds old atom `perm[i]`.
pub fn permute_molecule(mol: &Molecule, perm: &[usize]) -> Molecule {
    let mut out = mol.clone();
    out.atomic_numbers = perm.iter().map(|&p| mol.atomic_numbers[p]).collect();
    out.positions = perm.iter().map(|&p| mol.positions[p]).collect();
    out
}

/// Fisher-Yates permutation of 0..n.
pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
