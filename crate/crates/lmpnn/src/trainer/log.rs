//! Per-epoch records and the run summary.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Mean squared error on standardized targets, over the epoch's
    /// training passes.
    pub train_loss: f64,
    /// Mean absolute error in native units, from the same passes.
    pub train_mae: f64,
    /// Validation MAE in native units (falls back to the training value
    /// when the validation split is empty).
    pub valid_mae: f64,
    pub lr: f64,
    pub wall_time_s: f64,
    /// Present at gamma-log epochs; None marks an undefined ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_ratio: Option<Option<f64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// (epoch, ratio) at multiples of the log interval; None payload
    /// marks an undefined ratio (zero output-gate sum).
    pub gamma_series: Vec<(u32, Option<f64>)>,
    pub best_epoch: u32,
    pub best_valid_mae: f64,
}

impl TrainLog {
    pub fn validate(&self) -> Result<(), String> {
        for pair in self.epochs.windows(2) {
            if pair[1].epoch <= pair[0].epoch {
                return Err(format!(
                    "epochs not strictly increasing: {} then {}",
                    pair[0].epoch, pair[1].epoch
                ));
            }
        }
        let min = self
            .epochs
            .iter()
            .map(|e| e.valid_mae)
            .fold(f64::INFINITY, f64::min);
        if !self.epochs.is_empty() && (self.best_valid_mae - min).abs() > 1e-12 {
            return Err(format!(
                "best valid MAE {} is not the series minimum {min}",
                self.best_valid_mae
            ));
        }
        Ok(())
    }
}

/// Final summary written next to the per-epoch JSON lines.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub target: String,
    pub epochs_run: u32,
    pub best_epoch: u32,
    pub best_valid_mae: f64,
    pub gamma_series: Vec<(u32, Option<f64>)>,
    pub target_mean: f64,
    pub target_std: f64,
    pub train_size: usize,
    pub valid_size: usize,
    pub test_size: usize,
    pub wall_time_s: f64,
}
