//! The epoch loop: shuffled mini-batches, sharded forward passes with
//! deterministic gradient accumulation, Adam updates on the stepwise
//! schedule, early stopping on validation MAE, and checkpointing.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::predict_standardized;
use super::log::{EpochRecord, TrainLog, TrainSummary};
use super::schedule::{lr_at_epoch, EarlyStopping};
use super::{SplitSpec, TrainConfig, TrainError};
use crate::graph::{build_graph, MolecularGraph};
use crate::model::{
    featurize, forward, init_params, radial_table, GeometryPath, Mode, ModelConfig, ModelParams,
};
use crate::mol_io::{split_dataset, Molecule};
use crate::tensor::{save_checkpoint, AdamState, Shape};

/// Target z-scoring constants fitted on the training split.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(values: &[f64], enabled: bool) -> Self {
        if !enabled || values.is_empty() {
            return Self { mean: 0.0, std: 1.0 };
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / values.len() as f64;
        let std = var.sqrt();
        Self {
            mean,
            std: if std < 1e-12 { 1.0 } else { std },
        }
    }

    pub fn scale(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: TrainLog,
    /// Parameters at the best validation epoch.
    pub best: ModelParams,
    /// Parameters at termination.
    pub final_params: ModelParams,
    pub standardizer: Standardizer,
    pub train_ids: Vec<String>,
    pub valid_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub summary: TrainSummary,
}

fn derive_seed(seed: u64, epoch: u32, batch: usize, shard: usize) -> u64 {
    let mut z = seed
        ^ ((epoch as u64) << 40)
        ^ ((batch as u64) << 20)
        ^ (shard as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type SplitIds = (Vec<String>, Vec<String>, Vec<String>);

fn split_ids(
    dataset: &[Molecule],
    spec: &SplitSpec,
    seed: u64,
) -> Result<SplitIds, TrainError> {
    let ids: Vec<String> = dataset.iter().map(|m| m.id.clone()).collect();
    match spec {
        SplitSpec::Fractions { train, valid, test } => {
            let split = split_dataset(&ids, (*train, *valid, *test), seed)?;
            Ok((split.train_ids, split.valid_ids, split.test_ids))
        }
        SplitSpec::Counts { train, valid, test } => {
            let mut shuffled = ids;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            let need = train + valid + test;
            if shuffled.len() < need {
                return Err(TrainError::EmptySplit { which: "requested" });
            }
            let train_ids = shuffled[..*train].to_vec();
            let valid_ids = shuffled[*train..train + valid].to_vec();
            let test_ids = shuffled[train + valid..need].to_vec();
            Ok((train_ids, valid_ids, test_ids))
        }
    }
}

struct Prepared {
    graphs: Vec<MolecularGraph>,
    targets: Vec<f64>,
}

fn prepare(
    dataset: &[Molecule],
    ids: &[String],
    target: &str,
    cutoff: f64,
) -> Result<Prepared, TrainError> {
    let mut graphs = Vec::with_capacity(ids.len());
    let mut targets = Vec::with_capacity(ids.len());
    for id in ids {
        let mol = dataset
            .iter()
            .find(|m| &m.id == id)
            .expect("split ids come from the dataset");
        let value = mol
            .targets
            .get(target)
            .copied()
            .ok_or_else(|| TrainError::MissingTarget {
                id: mol.id.clone(),
                target: target.to_string(),
            })?;
        graphs.push(build_graph(mol, cutoff)?);
        targets.push(value);
    }
    Ok(Prepared { graphs, targets })
}

/// Train on standardized targets with MSE loss; the reported metric is
/// MAE in native units. Returns the log, the best and final parameter
/// snapshots, and the split.
pub fn train(
    dataset: &[Molecule],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    model_config.validate()?;
    let run_start = Instant::now();
    let (train_ids, valid_ids, test_ids) =
        split_ids(dataset, &train_config.split, train_config.seed)?;
    if train_ids.is_empty() {
        return Err(TrainError::EmptySplit { which: "train" });
    }

    let train_set = prepare(dataset, &train_ids, &train_config.target, model_config.cutoff)?;
    let valid_set = prepare(dataset, &valid_ids, &train_config.target, model_config.cutoff)?;
    let standardizer = Standardizer::fit(&train_set.targets, train_config.standardize);
    let table = radial_table(model_config)?;

    let mut params = init_params(model_config, train_config.seed)?;
    let mut adam = AdamState::new(params.store.num_values());
    let mut best_params = params.clone();
    let mut stopper = EarlyStopping::new(train_config.min_epochs, train_config.patience);
    let mut log = TrainLog::default();

    let mut log_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(std::fs::File::create(dir.join("train_log.jsonl"))?)
        }
        None => None,
    };

    let n_train = train_set.graphs.len();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut epochs_run = 0u32;
    for epoch in 0..train_config.max_epochs {
        let epoch_start = Instant::now();
        let lr = lr_at_epoch(epoch, train_config);

        // Shuffle order is a deterministic function of (seed, epoch).
        let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut epoch_sq_sum = 0.0f64;
        let mut epoch_abs_sum = 0.0f64;
        for (batch_idx, batch) in order.chunks(train_config.batch_size).enumerate() {
            let batch_n = batch.len();
            let mut flat_grads = vec![0.0f64; params.store.num_values()];
            for (shard_idx, shard) in batch
                .chunks(train_config.shard_molecules.max(1))
                .enumerate()
            {
                let graphs: Vec<&MolecularGraph> =
                    shard.iter().map(|&i| &train_set.graphs[i]).collect();
                let batch_feat = featurize(&graphs, &params, model_config, &table)?;
                let dropout_seed =
                    derive_seed(train_config.seed, epoch, batch_idx, shard_idx);
                let (mut tape, handles) = forward(
                    &params,
                    model_config,
                    &batch_feat,
                    Mode::Train,
                    GeometryPath::Precomputed,
                    dropout_seed,
                )?;
                let scaled_targets: Vec<f64> = shard
                    .iter()
                    .map(|&i| standardizer.scale(train_set.targets[i]))
                    .collect();
                let t = tape.constant(Shape::new(shard.len(), 1), scaled_targets)?;
                let diff = tape.sub(handles.y_hat, t)?;
                let sq = tape.mul(diff, diff)?;
                let total = tape.sum_all(sq);
                // Scale so shard losses sum to the batch-mean MSE.
                let loss = tape.scale_const(total, 1.0 / batch_n as f64);
                let loss_value = tape.values(loss)[0];
                if !loss_value.is_finite() {
                    let param_norm = params
                        .store
                        .data()
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt();
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        param_norm,
                    });
                }
                epoch_sq_sum += tape.values(total)[0];
                for err in tape.values(diff) {
                    epoch_abs_sum += (err * standardizer.std).abs();
                }

                let grads = tape.backward(loss)?;
                let shard_grads = handles.binding.collect_flat_grads(&params.store, &grads);
                for (acc, g) in flat_grads.iter_mut().zip(&shard_grads) {
                    *acc += g;
                }
            }
            adam.apply(params.store.data_mut(), &flat_grads, lr)?;
        }

        let train_loss = epoch_sq_sum / n_train as f64;
        let train_mae = epoch_abs_sum / n_train as f64;
        let valid_mae = if valid_set.graphs.is_empty() {
            train_mae
        } else {
            let graphs: Vec<&MolecularGraph> = valid_set.graphs.iter().collect();
            let preds = predict_standardized(
                &params,
                model_config,
                &table,
                &graphs,
                train_config.shard_molecules.max(1),
            )?;
            preds
                .iter()
                .zip(&valid_set.targets)
                .map(|(z, t)| (standardizer.unscale(*z) - t).abs())
                .sum::<f64>()
                / preds.len() as f64
        };

        let (improved, stop) = stopper.observe(epoch, valid_mae);
        if improved {
            best_params = params.clone();
            if let Some(dir) = out_dir {
                write_checkpoint(
                    &dir.join("best.ckpt"),
                    &best_params,
                    Some(&adam),
                    model_config,
                    train_config,
                    &standardizer,
                )?;
            }
        }

        let gamma_due = train_config.gamma_log_interval > 0
            && epoch > 0
            && epoch % train_config.gamma_log_interval == 0
            && epoch <= train_config.gamma_log_until;
        let gamma_ratio = if gamma_due {
            let r = params.gamma_ratio();
            log.gamma_series.push((epoch, r));
            Some(r)
        } else {
            None
        };

        let record = EpochRecord {
            epoch,
            train_loss,
            train_mae,
            valid_mae,
            lr,
            wall_time_s: epoch_start.elapsed().as_secs_f64(),
            gamma_ratio,
        };
        if let Some(f) = log_file.as_mut() {
            use std::io::Write;
            serde_json::to_writer(&mut *f, &record).map_err(std::io::Error::other)?;
            writeln!(f)?;
        }
        log.epochs.push(record);
        epochs_run = epoch + 1;
        let reached_target = train_config
            .stop_at_train_mae
            .map(|threshold| train_mae < threshold)
            .unwrap_or(false);
        if stop || reached_target {
            break;
        }
    }

    log.best_epoch = stopper.best_epoch;
    log.best_valid_mae = stopper.best_value;

    let summary = TrainSummary {
        target: train_config.target.clone(),
        epochs_run,
        best_epoch: stopper.best_epoch,
        best_valid_mae: stopper.best_value,
        gamma_series: log.gamma_series.clone(),
        target_mean: standardizer.mean,
        target_std: standardizer.std,
        train_size: train_ids.len(),
        valid_size: valid_ids.len(),
        test_size: test_ids.len(),
        wall_time_s: run_start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        write_checkpoint(
            &dir.join("final.ckpt"),
            &params,
            Some(&adam),
            model_config,
            train_config,
            &standardizer,
        )?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_vec_pretty(&summary).map_err(std::io::Error::other)?,
        )?;
    }

    Ok(TrainOutcome {
        log,
        best: best_params,
        final_params: params,
        standardizer,
        train_ids,
        valid_ids,
        test_ids,
        summary,
    })
}

/// Energy-only MD training: identical loop with MD hyperparameters.
/// Reference forces never enter the loss; force error is reported at
/// evaluation time from position gradients.
pub fn md_energy_training(
    frames: &[Molecule],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    train(frames, model_config, train_config, out_dir)
}

pub(super) fn write_checkpoint(
    path: &Path,
    params: &ModelParams,
    adam: Option<&AdamState>,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    standardizer: &Standardizer,
) -> Result<(), TrainError> {
    let extra = serde_json::json!({
        "target": train_config.target,
        "target_mean": standardizer.mean,
        "target_std": standardizer.std,
        "model_config": model_config,
        "gamma_registry": params.gamma,
        "elements": params.elements,
    });
    let gamma_names: Vec<String> = params.gamma.all_names();
    save_checkpoint(path, &params.store, adam, &gamma_names, extra)?;
    Ok(())
}

/// Rebuild model parameters from a loaded checkpoint.
pub(super) fn params_from_checkpoint(
    ck: &crate::tensor::Checkpoint,
) -> Result<(ModelParams, ModelConfig, Standardizer, String), TrainError> {
    let extra = &ck.manifest.extra;
    let model_config: ModelConfig = serde_json::from_value(extra["model_config"].clone())
        .map_err(std::io::Error::other)?;
    let gamma: crate::model::GammaRegistry =
        serde_json::from_value(extra["gamma_registry"].clone()).map_err(std::io::Error::other)?;
    let elements: Vec<u8> =
        serde_json::from_value(extra["elements"].clone()).map_err(std::io::Error::other)?;
    let standardizer = Standardizer {
        mean: extra["target_mean"].as_f64().unwrap_or(0.0),
        std: extra["target_std"].as_f64().unwrap_or(1.0),
    };
    let target = extra["target"].as_str().unwrap_or("u0").to_string();
    Ok((
        ModelParams {
            store: ck.store.clone(),
            gamma,
            elements,
        },
        model_config,
        standardizer,
        target,
    ))
}
