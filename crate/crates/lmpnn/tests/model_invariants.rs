//! Model-level invariants: symmetry of the prediction, force structure,
//! and gradient completeness.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lmpnn::graph::build_graph;
use lmpnn::model::{
    evaluate, featurize, forward, gradient_audit, init_params, predict_forces, radial_table,
    GeometryPath, Mode, ModelConfig, ModelParams,
};
use lmpnn::synthetic::random_molecule;

fn test_config() -> ModelConfig {
    ModelConfig {
        hidden_width: 16,
        ..ModelConfig::default()
    }
}

fn eval_y(params: &ModelParams, config: &ModelConfig, mol: &lmpnn::mol_io::Molecule) -> f64 {
    let table = radial_table(config).unwrap();
    let graph = build_graph(mol, config.cutoff).unwrap();
    let batch = featurize(&[&graph], params, config, &table).unwrap();
    evaluate(params, config, &batch, false).unwrap().y_hat[0]
}

#[test]
fn prediction_invariant_under_permutation_and_rigid_motion() {
    let config = test_config();
    let params = init_params(&config, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for trial in 0..12 {
        let mol = random_molecule(&mut rng, 4 + trial % 5, &[1, 6, 7, 8, 9]);
        let y = eval_y(&params, &config, &mol);

        let perm = common::random_permutation(&mut rng, mol.num_atoms());
        let permuted = common::permute_molecule(&mol, &perm);
        let y_perm = eval_y(&params, &config, &permuted);
        assert!(
            (y - y_perm).abs() < 1e-9,
            "permutation changed prediction: {y} vs {y_perm}"
        );

        let rot = common::random_rotation(&mut rng);
        let shift = [1.3, -2.2, 0.7];
        let moved = common::transform_molecule(&mol, &rot, shift);
        let y_moved = eval_y(&params, &config, &moved);
        assert!(
            (y - y_moved).abs() < 1e-9,
            "rigid motion changed prediction: {y} vs {y_moved}"
        );
    }
}

#[test]
fn permuting_atoms_permutes_per_atom_contributions() {
    let config = test_config();
    let params = init_params(&config, 12).unwrap();
    let table = radial_table(&config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mol = random_molecule(&mut rng, 6, &[1, 6, 8]);
    let perm = common::random_permutation(&mut rng, 6);
    let permuted = common::permute_molecule(&mol, &perm);

    let per_atom = |m: &lmpnn::mol_io::Molecule| {
        let graph = build_graph(m, config.cutoff).unwrap();
        let batch = featurize(&[&graph], &params, &config, &table).unwrap();
        evaluate(&params, &config, &batch, true)
            .unwrap()
            .per_atom
            .unwrap()
    };
    let base = per_atom(&mol);
    let moved = per_atom(&permuted);
    for (new_idx, &old_idx) in perm.iter().enumerate() {
        assert!(
            (moved[new_idx] - base[old_idx]).abs() < 1e-9,
            "atom contribution did not follow the permutation"
        );
    }
}

#[test]
fn forces_sum_to_zero_and_are_opposite_for_diatomic() {
    let config = test_config();
    let params = init_params(&config, 13).unwrap();
    let mol = lmpnn::mol_io::Molecule {
        id: "o2".into(),
        atomic_numbers: vec![8, 8],
        positions: vec![[0.0, 0.0, 0.0], [1.21, 0.0, 0.0]],
        targets: Default::default(),
        forces: None,
    };
    let graph = build_graph(&mol, config.cutoff).unwrap();
    let forces = predict_forces(&graph, &params, &config).unwrap();
    for c in 0..3 {
        let net = forces[0][c] + forces[1][c];
        assert!(net.abs() < 1e-8, "net force component {c} = {net}");
        assert!(
            (forces[0][c] + forces[1][c]).abs() < 1e-8,
            "diatomic forces must be equal and opposite"
        );
    }
    // The bond force is along the axis and nonzero for generic params.
    assert!(forces[0][0].abs() > 1e-12);
}

#[test]
fn forces_rotate_with_the_molecule() {
    let config = test_config();
    let params = init_params(&config, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mol = random_molecule(&mut rng, 5, &[1, 6, 8]);
    let rot = common::random_rotation(&mut rng);
    let moved = common::transform_molecule(&mol, &rot, [0.4, 0.1, -0.9]);

    let base = predict_forces(&build_graph(&mol, config.cutoff).unwrap(), &params, &config).unwrap();
    let rotated = predict_forces(
        &build_graph(&moved, config.cutoff).unwrap(),
        &params,
        &config,
    )
    .unwrap();
    for (f, fr) in base.iter().zip(&rotated) {
        let expected = common::apply_rotation(&rot, *f);
        for c in 0..3 {
            assert!(
                (expected[c] - fr[c]).abs() < 1e-8,
                "force equivariance violated: {expected:?} vs {fr:?}"
            );
        }
    }
}

#[test]
fn net_force_vanishes_for_random_molecules() {
    let config = test_config();
    let params = init_params(&config, 15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..5 {
        let mol = random_molecule(&mut rng, 6, &[1, 6, 7, 8, 9]);
        let graph = build_graph(&mol, config.cutoff).unwrap();
        let forces = predict_forces(&graph, &params, &config).unwrap();
        for c in 0..3 {
            let net: f64 = forces.iter().map(|f| f[c]).sum();
            assert!(net.abs() < 1e-8, "net force {net} in component {c}");
        }
    }
}

#[test]
fn every_parameter_receives_gradient() {
    // Generic input containing every whitelisted element; a disconnected
    // parameter would show up as a missing or zero gradient.
    let config = test_config();
    let params = init_params(&config, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut mol = random_molecule(&mut rng, 10, &[1, 6, 7, 8, 9]);
    mol.atomic_numbers = vec![1, 6, 7, 8, 9, 1, 6, 7, 8, 9];
    let graph = build_graph(&mol, config.cutoff).unwrap();
    assert!(!graph.angles.is_empty(), "need angles for a generic check");
    let table = radial_table(&config).unwrap();
    let batch = featurize(&[&graph], &params, &config, &table).unwrap();
    let (mut tape, handles) = forward(
        &params,
        &config,
        &batch,
        Mode::Eval,
        GeometryPath::Precomputed,
        0,
    )
    .unwrap();
    let grads = tape.backward(handles.y_hat).unwrap();
    let flat = handles.binding.collect_flat_grads(&params.store, &grads);
    for entry in params.store.entries() {
        let slice = &flat[entry.offset..entry.offset + entry.shape.len()];
        let max_abs = slice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            max_abs > 1e-12,
            "parameter '{}' received no gradient (max |g| = {max_abs})",
            entry.name
        );
    }
}

#[test]
fn full_model_gradient_audit_on_small_molecule() {
    let config = test_config();
    let params = init_params(&config, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mol = random_molecule(&mut rng, 4, &[1, 6, 8]);
    let graph = build_graph(&mol, config.cutoff).unwrap();
    let report = gradient_audit(&graph, &params, &config, 6, 1e-5, 42).unwrap();
    assert!(
        report.max_param_rel_error < 1e-4,
        "worst parameter {} at {}",
        report.worst_param,
        report.max_param_rel_error
    );
    assert!(
        report.max_force_rel_error < 1e-4,
        "force gradient mismatch {}",
        report.max_force_rel_error
    );
    for c in 0..3 {
        assert!(report.force_sum[c].abs() < 1e-8);
    }
}
