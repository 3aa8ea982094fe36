//! MAE evaluation in native and comparison units.

use serde::Serialize;

use super::run::Standardizer;
use super::TrainError;
use crate::basis::RadialBasisTable;
use crate::graph::{build_graph, MolecularGraph};
use crate::model::{evaluate, featurize, predict_forces, ModelConfig, ModelParams};
use crate::mol_io::{convert_energy, EnergyUnit, Molecule};

/// Unit labels and the native-to-comparison conversion of a target.
#[derive(Copy, Clone, Debug)]
pub struct TargetUnits {
    pub native: &'static str,
    pub comparison: &'static str,
    pub conversion: Option<(EnergyUnit, EnergyUnit)>,
}

/// Native units follow the dataset's property table; energy-valued
/// targets also get the benchmark comparison unit.
pub fn target_units(target: &str) -> Result<TargetUnits, TrainError> {
    let u = match target {
        "mu" => TargetUnits {
            native: "D",
            comparison: "D",
            conversion: None,
        },
        "alpha" => TargetUnits {
            native: "a0^3",
            comparison: "a0^3",
            conversion: None,
        },
        "homo" | "lumo" | "gap" | "u0" | "u" | "h" | "g" => TargetUnits {
            native: "Ha",
            comparison: "eV",
            conversion: Some((EnergyUnit::Ha, EnergyUnit::Ev)),
        },
        "zpve" => TargetUnits {
            native: "Ha",
            comparison: "meV",
            conversion: Some((EnergyUnit::Ha, EnergyUnit::Mev)),
        },
        "r2" => TargetUnits {
            native: "a0^2",
            comparison: "a0^2",
            conversion: None,
        },
        "cv" => TargetUnits {
            native: "cal/(mol K)",
            comparison: "cal/(mol K)",
            conversion: None,
        },
        "energy" => TargetUnits {
            native: "kcal/mol",
            comparison: "kcal/mol",
            conversion: None,
        },
        _ => {
            return Err(TrainError::UnknownTargetUnit {
                target: target.to_string(),
            })
        }
    };
    Ok(u)
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub target: String,
    pub count: usize,
    pub mae_native: f64,
    pub native_unit: String,
    pub mae_comparison: f64,
    pub comparison_unit: String,
    /// Mean absolute force-component error against reference forces,
    /// kcal/mol/angstrom; present when every molecule carries them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_mae: Option<f64>,
}

/// Standardized-scale predictions for a set of graphs, evaluated in
/// shards to bound tape memory.
pub(super) fn predict_standardized(
    params: &ModelParams,
    config: &ModelConfig,
    table: &RadialBasisTable,
    graphs: &[&MolecularGraph],
    shard: usize,
) -> Result<Vec<f64>, TrainError> {
    let mut out = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(shard.max(1)) {
        let batch = featurize(chunk, params, config, table)?;
        let fwd = evaluate(params, config, &batch, false)?;
        out.extend_from_slice(&fwd.y_hat);
    }
    Ok(out)
}

/// MAE of a parameter snapshot on a molecule set, reported in the
/// target's native unit and its comparison unit. Evaluation is
/// deterministic: dropout is inactive outside training.
pub fn evaluate_params(
    params: &ModelParams,
    config: &ModelConfig,
    standardizer: &Standardizer,
    molecules: &[Molecule],
    target: &str,
) -> Result<EvalReport, TrainError> {
    let units = target_units(target)?;
    let table = crate::model::radial_table(config)?;
    let mut graphs = Vec::with_capacity(molecules.len());
    let mut targets = Vec::with_capacity(molecules.len());
    for mol in molecules {
        let value = mol
            .targets
            .get(target)
            .copied()
            .ok_or_else(|| TrainError::MissingTarget {
                id: mol.id.clone(),
                target: target.to_string(),
            })?;
        graphs.push(build_graph(mol, config.cutoff)?);
        targets.push(value);
    }
    if graphs.is_empty() {
        return Err(TrainError::EmptySplit { which: "evaluation" });
    }
    let refs: Vec<&MolecularGraph> = graphs.iter().collect();
    let preds = predict_standardized(params, config, &table, &refs, 4)?;
    let mae_native = preds
        .iter()
        .zip(&targets)
        .map(|(z, t)| (standardizer.unscale(*z) - t).abs())
        .sum::<f64>()
        / preds.len() as f64;
    let mae_comparison = match units.conversion {
        Some((from, to)) => convert_energy(mae_native, from, to),
        None => mae_native,
    };

    let force_mae = if molecules.iter().all(|m| m.forces.is_some()) {
        let mut abs_sum = 0.0f64;
        let mut n = 0usize;
        for (mol, graph) in molecules.iter().zip(&graphs) {
            let predicted = predict_forces(graph, params, config)?;
            let reference = mol.forces.as_ref().unwrap();
            for (p, r) in predicted.iter().zip(reference) {
                for c in 0..3 {
                    // Predictions differentiate the standardized output;
                    // un-scale back to native energy units.
                    abs_sum += (p[c] * standardizer.std - r[c]).abs();
                    n += 1;
                }
            }
        }
        Some(abs_sum / n as f64)
    } else {
        None
    };

    Ok(EvalReport {
        target: target.to_string(),
        count: preds.len(),
        mae_native,
        native_unit: units.native.to_string(),
        mae_comparison,
        comparison_unit: units.comparison.to_string(),
        force_mae,
    })
}

/// Evaluate a checkpoint file against a molecule set.
pub fn evaluate_checkpoint(
    checkpoint_path: &std::path::Path,
    molecules: &[Molecule],
    target_override: Option<&str>,
) -> Result<EvalReport, TrainError> {
    let ck = crate::tensor::load_checkpoint(checkpoint_path)?;
    let (params, config, standardizer, target) = super::run::params_from_checkpoint(&ck)?;
    let target = target_override.unwrap_or(&target);
    evaluate_params(&params, &config, &standardizer, molecules, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mapping_for_energy_targets() {
        let u0 = target_units("u0").unwrap();
        assert_eq!(u0.native, "Ha");
        assert_eq!(u0.comparison, "eV");
        let zpve = target_units("zpve").unwrap();
        assert_eq!(zpve.comparison, "meV");
        let mu = target_units("mu").unwrap();
        assert!(mu.conversion.is_none());
        assert!(matches!(
            target_units("banana"),
            Err(TrainError::UnknownTargetUnit { .. })
        ));
    }

    #[test]
    fn mae_in_mev_is_thousand_times_ev() {
        let mae_ha = 0.0123;
        let ev = convert_energy(mae_ha, EnergyUnit::Ha, EnergyUnit::Ev);
        let mev = convert_energy(mae_ha, EnergyUnit::Ha, EnergyUnit::Mev);
        assert!((mev - 1000.0 * ev).abs() / mev < 1e-12);
    }
}
