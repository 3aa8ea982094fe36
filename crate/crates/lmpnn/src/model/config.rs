//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tensor::Activation;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    /// Radial basis width n.
    pub radial_functions: usize,
    /// Angular basis width m.
    pub angular_functions: usize,
    /// Hidden feature width F.
    pub hidden_width: usize,
    pub num_single_blocks: usize,
    pub num_output_blocks: usize,
    pub num_interaction_blocks: usize,
    /// Cutoff radius, angstrom.
    pub cutoff: f64,
    pub activation: Activation,
    /// 0 for QM9-style property training, 0.33 for MD energies.
    pub dropout_rate: f64,
    /// Atomic numbers with embedding rows, ascending.
    pub elements: Vec<u8>,
    pub normalization_grid_points: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            radial_functions: 12,
            angular_functions: 12,
            hidden_width: 128,
            num_single_blocks: 6,
            num_output_blocks: 7,
            num_interaction_blocks: 6,
            cutoff: 4.0,
            activation: Activation::SoftplusShifted,
            dropout_rate: 0.0,
            elements: vec![1, 6, 7, 8, 9],
            normalization_grid_points: 4096,
        }
    }
}

impl ModelConfig {
    /// Defaults for MD trajectory energies: dropout 0.33 and the
    /// C/H/O element set.
    pub fn md_default() -> Self {
        Self {
            dropout_rate: 0.33,
            elements: vec![1, 6, 8],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("radial_functions", self.radial_functions),
            ("angular_functions", self.angular_functions),
            ("hidden_width", self.hidden_width),
            ("num_single_blocks", self.num_single_blocks),
            ("num_output_blocks", self.num_output_blocks),
            ("num_interaction_blocks", self.num_interaction_blocks),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if !self.cutoff.is_finite() || self.cutoff <= 0.0 {
            return Err(ModelError::InvalidConfig("cutoff must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig(
                "dropout_rate must be in [0, 1)".into(),
            ));
        }
        if self.elements.is_empty() {
            return Err(ModelError::InvalidConfig("elements must be non-empty".into()));
        }
        Ok(())
    }
}
