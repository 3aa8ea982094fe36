//! Bias-corrected Adam over a flat parameter vector.

use serde::{Deserialize, Serialize};

use super::TensorError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
    pub fn apply(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
    ) -> Result<(), TensorError> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(TensorError::LengthMismatch {
                expected: self.first_moment.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] =
                self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
