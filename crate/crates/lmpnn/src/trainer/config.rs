//! Training hyperparameters.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Random fractional split of the dataset.
    Fractions { train: f64, valid: f64, test: f64 },
    /// Explicit sample counts (MD protocol); any remainder is unused.
    Counts {
        train: usize,
        valid: usize,
        test: usize,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fractions {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub target: String,
    pub batch_size: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Multiplicative decay applied every `decay_interval` epochs
    /// (0.96 for property training, 0.9 for MD energies).
    pub decay_factor: f64,
    pub decay_interval: u32,
    /// Training never stops earlier than this many epochs.
    pub min_epochs: u32,
    /// Hard upper bound on the epoch loop.
    pub max_epochs: u32,
    /// Early stop once the best validation MAE is this many epochs old.
    pub patience: u32,
    pub seed: u64,
    /// Gamma ratio is recorded at multiples of this epoch interval...
    pub gamma_log_interval: u32,
    /// ...up to and including this epoch.
    pub gamma_log_until: u32,
    pub split: SplitSpec,
    /// Molecules per forward shard inside a batch; gradients accumulate
    /// deterministically across shards, so this only bounds memory.
    pub shard_molecules: usize,
    /// Train on z-scored targets and un-scale at evaluation.
    pub standardize: bool,
    /// Optional success exit: stop once the epoch's training MAE (native
    /// units) drops below this value and min_epochs have run.
    pub stop_at_train_mae: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            target: "u0".to_string(),
            batch_size: 24,
            lr0: 1e-3,
            decay_factor: 0.96,
            decay_interval: 20,
            min_epochs: 300,
            max_epochs: 10_000,
            patience: 30,
            seed: 0,
            gamma_log_interval: 30,
            gamma_log_until: 240,
            split: SplitSpec::default(),
            shard_molecules: 4,
            standardize: true,
            stop_at_train_mae: None,
        }
    }
}

impl TrainConfig {
    /// MD-energy defaults: faster decay, explicit sample counts with a
    /// validation carve-out from the training frames.
    pub fn md_default(train_frames: usize, test_frames: usize) -> Self {
        let valid = (train_frames / 10).clamp(1, 100);
        Self {
            target: "energy".to_string(),
            decay_factor: 0.9,
            split: SplitSpec::Counts {
                train: train_frames.saturating_sub(valid),
                valid,
                test: test_frames,
            },
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_protocol() {
        let c = TrainConfig::default();
        assert_eq!(c.batch_size, 24);
        assert_eq!(c.lr0, 1e-3);
        assert_eq!(c.decay_factor, 0.96);
        assert_eq!(c.decay_interval, 20);
        assert_eq!(c.min_epochs, 300);
        assert_eq!(c.patience, 30);
        assert_eq!(c.gamma_log_interval, 30);
        assert_eq!(c.gamma_log_until, 240);
    }

    #[test]
    fn md_defaults_carve_validation_frames() {
        let c = TrainConfig::md_default(1000, 500);
        assert_eq!(c.decay_factor, 0.9);
        assert_eq!(
            c.split,
            SplitSpec::Counts {
                train: 900,
                valid: 100,
                test: 500
            }
        );
        let tiny = TrainConfig::md_default(10, 0);
        assert_eq!(
            tiny.split,
            SplitSpec::Counts {
                train: 9,
                valid: 1,
                test: 0
            }
        );
    }
}
