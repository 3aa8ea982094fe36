//! Convergence probe for the overfit acceptance setup.
//!
//! Environment knobs: PROBE_DECAY, PROBE_LR0, PROBE_EPOCHS,
//! PROBE_FIXTURE (uniform|weighted), PROBE_INTERVAL.

use lmpnn::model::ModelConfig;
use lmpnn::mol_io::{convert_energy, EnergyUnit};
use lmpnn::synthetic::property_dataset;
use lmpnn::trainer::{train, SplitSpec, TrainConfig};

fn env_f64(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let decay = env_f64("PROBE_DECAY", 0.96);
    let lr0 = env_f64("PROBE_LR0", 1e-3);
    let epochs = env_f64("PROBE_EPOCHS", 500.0) as u32;
    let interval = env_f64("PROBE_INTERVAL", 20.0) as u32;

    let molecules = property_dataset(808, 100);
    let targets: Vec<f64> = molecules.iter().map(|m| m.targets["u0"]).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let std = (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
        / targets.len() as f64)
        .sqrt();
    eprintln!(
        "fixture: mean {mean:.2} Ha, std {std:.2} Ha = {:.0} eV",
        convert_energy(std, EnergyUnit::Ha, EnergyUnit::Ev)
    );

    let model_config = ModelConfig::default();
    let train_config = TrainConfig {
        target: "u0".into(),
        batch_size: 24,
        lr0,
        decay_factor: decay,
        decay_interval: interval,
        min_epochs: epochs,
        max_epochs: epochs,
        patience: 1_000_000,
        split: SplitSpec::Fractions { train: 1.0, valid: 0.0, test: 0.0 },
        seed: 808,
        shard_molecules: 24,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let outcome = train(&molecules, &model_config, &train_config, None).unwrap();
    for rec in outcome.log.epochs.iter().filter(|r| (r.epoch + 1) % 25 == 0 || r.epoch == 0) {
        let ev = convert_energy(rec.train_mae, EnergyUnit::Ha, EnergyUnit::Ev);
        eprintln!(
            "epoch {:>4}  lr {:.2e}  train MAE {:.4} eV",
            rec.epoch, rec.lr, ev
        );
    }
    let best = outcome
        .log
        .epochs
        .iter()
        .min_by(|a, b| a.train_mae.partial_cmp(&b.train_mae).unwrap())
        .unwrap();
    eprintln!(
        "best in-pass: epoch {} at {:.4} eV",
        best.epoch,
        convert_energy(best.train_mae, EnergyUnit::Ha, EnergyUnit::Ev)
    );
    eprintln!("total {:.0}s", start.elapsed().as_secs_f64());
}
