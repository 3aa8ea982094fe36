//! Stepwise learning-rate decay and the early-stopping rule.

use super::TrainConfig;

/// lr0 * factor^floor(epoch / interval): piecewise constant with jumps
/// exactly at interval multiples.
pub fn lr_at_epoch(epoch: u32, config: &TrainConfig) -> f64 {
    let steps = (epoch / config.decay_interval.max(1)) as i32;
    config.lr0 * config.decay_factor.powi(steps)
}

/// Tracks the best validation MAE; any strict decrease counts as an
/// improvement. Stops once the best value is `patience` epochs old and
/// at least `min_epochs` epochs have run.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    min_epochs: u32,
    patience: u32,
    pub best_epoch: u32,
    pub best_value: f64,
}

impl EarlyStopping {
    pub fn new(min_epochs: u32, patience: u32) -> Self {
        Self {
            min_epochs,
            patience,
            best_epoch: 0,
            best_value: f64::INFINITY,
        }
    }

    /// Feed the epoch's validation MAE. Returns (improved, stop).
    pub fn observe(&mut self, epoch: u32, value: f64) -> (bool, bool) {
        let improved = value < self.best_value;
        if improved {
            self.best_value = value;
            self.best_epoch = epoch;
        }
        let epochs_run = epoch + 1;
        let stop = epochs_run >= self.min_epochs && epoch - self.best_epoch >= self.patience;
        (improved, stop)
    }
}
