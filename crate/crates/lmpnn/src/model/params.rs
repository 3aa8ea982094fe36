//! Parameter initialization and the scalar-gate registry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::ModelError;
use crate::tensor::{ParamStore, Shape};

/// Names of every scalar gate, partitioned by block family. The ratio
/// tracked during training divides the single-body sum by the
/// output-block sum; interaction gates belong to neither side.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GammaRegistry {
    pub single: Vec<String>,
    pub output: Vec<String>,
    pub interaction: Vec<String>,
}

impl GammaRegistry {
    pub fn from_config(config: &ModelConfig) -> Self {
        Self {
            single: (0..config.num_single_blocks)
                .map(|t| format!("single.{t}.gamma"))
                .collect(),
            output: (0..config.num_output_blocks)
                .map(|t| format!("output.{t}.gamma"))
                .collect(),
            interaction: (0..config.num_interaction_blocks)
                .map(|t| format!("interaction.{t}.gamma"))
                .collect(),
        }
    }

    pub fn all_names(&self) -> Vec<String> {
        self.single
            .iter()
            .chain(&self.output)
            .chain(&self.interaction)
            .cloned()
            .collect()
    }
}

/// Model parameters: flat storage plus the element-row key and gate
/// registry needed to interpret it.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub store: ParamStore,
    pub gamma: GammaRegistry,
    pub elements: Vec<u8>,
}

impl ModelParams {
    /// Embedding-table row of an atomic number.
    pub fn element_row(&self, z: u8) -> Result<usize, ModelError> {
        self.elements
            .iter()
            .position(|&e| e == z)
            .ok_or(ModelError::MissingEmbedding { z })
    }

    /// Ratio of summed single-body gates over summed output-block gates;
    /// undefined when the denominator is zero.
    pub fn gamma_ratio(&self) -> Option<f64> {
        let sum = |names: &[String]| -> f64 {
            names
                .iter()
                .map(|n| self.store.scalar(n).unwrap_or(0.0))
                .sum()
        };
        let denominator = sum(&self.gamma.output);
        if denominator == 0.0 {
            None
        } else {
            Some(sum(&self.gamma.single) / denominator)
        }
    }
}

/// One draw from the gate initializer: gamma ~ exp(N(0, 0.1^2)), a
/// slightly right-skewed distribution peaked at 1.
pub fn sample_gamma<R: Rng>(rng: &mut R) -> f64 {
    let normal = Normal::new(0.0f64, 0.1).expect("valid normal");
    normal.sample(rng).exp()
}

fn glorot_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect()
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn dense(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Result<(), ModelError> {
        let w = glorot_uniform(&mut self.rng, fan_in, fan_out);
        self.store
            .add(&format!("{prefix}.w"), Shape::new(fan_in, fan_out), w)?;
        self.store.add(
            &format!("{prefix}.b"),
            Shape::new(1, fan_out),
            vec![0.0; fan_out],
        )?;
        Ok(())
    }

    fn gate(&mut self, name: &str) -> Result<(), ModelError> {
        let g = sample_gamma(&mut self.rng);
        self.store.add(name, Shape::scalar(), vec![g])?;
        Ok(())
    }
}

/// Build freshly initialized parameters. Deterministic per seed: draws
/// happen in registration order from one seeded stream.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams, ModelError> {
    config.validate()?;
    let f = config.hidden_width;
    let n = config.radial_functions;
    let m = config.angular_functions;

    let mut store = ParamStore::new();
    let mut b = Builder {
        store: &mut store,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    // Embedding rows: uniform(-sqrt(3)/sqrt(F), sqrt(3)/sqrt(F)),
    // i.e. variance 1/F.
    let limit = 3.0f64.sqrt() / (f as f64).sqrt();
    let emb: Vec<f64> = (0..config.elements.len() * f)
        .map(|_| b.rng.random_range(-limit..limit))
        .collect();
    b.store
        .add("embedding.weight", Shape::new(config.elements.len(), f), emb)?;

    b.dense("embed.filter", n, f)?;
    b.dense("embed.combine", 2 * f, f)?;

    for t in 0..config.num_interaction_blocks {
        b.dense(&format!("interaction.{t}.source"), f, f)?;
        b.dense(&format!("interaction.{t}.angular"), m, f)?;
        b.dense(&format!("interaction.{t}.radial"), n, f)?;
        b.dense(&format!("interaction.{t}.self"), f, f)?;
        b.dense(&format!("interaction.{t}.out"), f, f)?;
        b.gate(&format!("interaction.{t}.gamma"))?;
    }
    for t in 0..config.num_output_blocks {
        b.dense(&format!("output.{t}.radial"), n, f)?;
        b.dense(&format!("output.{t}.hidden"), f, f)?;
        b.dense(&format!("output.{t}.project"), f, 1)?;
        b.gate(&format!("output.{t}.gamma"))?;
    }
    for t in 0..config.num_single_blocks {
        b.dense(&format!("single.{t}.dense1"), f, f)?;
        b.dense(&format!("single.{t}.dense2"), f, f)?;
        b.gate(&format!("single.{t}.gamma"))?;
    }
    b.dense("single.project", f, 1)?;

    // Branch coefficients drawn from the same distribution as the gates.
    b.gate("branch.c_single")?;
    b.gate("branch.c_passing")?;

    Ok(ModelParams {
        store,
        gamma: GammaRegistry::from_config(config),
        elements: config.elements.clone(),
    })
}

/// Per-block-family parameter counts, for the `describe` command.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCensus {
    pub embedding: usize,
    pub embedding_block: usize,
    pub interaction_blocks: usize,
    pub output_blocks: usize,
    pub single_blocks: usize,
    pub branch: usize,
    pub total: usize,
    pub gamma_registry: GammaRegistry,
}

pub fn describe(params: &ModelParams) -> ParamCensus {
    let mut census = ParamCensus {
        embedding: 0,
        embedding_block: 0,
        interaction_blocks: 0,
        output_blocks: 0,
        single_blocks: 0,
        branch: 0,
        total: params.store.num_values(),
        gamma_registry: params.gamma.clone(),
    };
    for e in params.store.entries() {
        let len = e.shape.len();
        if e.name == "embedding.weight" {
            census.embedding += len;
        } else if e.name.starts_with("embed.") {
            census.embedding_block += len;
        } else if e.name.starts_with("interaction.") {
            census.interaction_blocks += len;
        } else if e.name.starts_with("output.") {
            census.output_blocks += len;
        } else if e.name.starts_with("single.") {
            census.single_blocks += len;
        } else if e.name.starts_with("branch.") {
            census.branch += len;
        }
    }
    census
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_samples_match_declared_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let logs: Vec<f64> = (0..n).map(|_| sample_gamma(&mut rng).ln()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!(mean.abs() < 0.002, "mean(ln gamma) = {mean}");
        assert!((std - 0.1).abs() < 0.002, "std(ln gamma) = {std}");
    }

    #[test]
    fn all_gammas_positive() {
        let params = init_params(&small_config(), 3).unwrap();
        for name in params.gamma.all_names() {
            assert!(params.store.scalar(&name).unwrap() > 0.0);
        }
        assert!(params.store.scalar("branch.c_single").unwrap() > 0.0);
        assert!(params.store.scalar("branch.c_passing").unwrap() > 0.0);
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            hidden_width: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn same_seed_same_params() {
        let a = init_params(&small_config(), 42).unwrap();
        let b = init_params(&small_config(), 42).unwrap();
        assert_eq!(a.store.data(), b.store.data());
        let c = init_params(&small_config(), 43).unwrap();
        assert_ne!(a.store.data(), c.store.data());
    }

    #[test]
    fn gamma_ratio_arithmetic() {
        let mut params = init_params(&small_config(), 1).unwrap();
        for name in params.gamma.all_names() {
            params.store.slice_mut(&name).unwrap()[0] = 1.0;
        }
        // 6 single gates over 7 output gates.
        let r = params.gamma_ratio().unwrap();
        assert!((r - 6.0 / 7.0).abs() < 1e-12);

        for name in params.gamma.single.clone() {
            params.store.slice_mut(&name).unwrap()[0] = 2.0;
        }
        let doubled = params.gamma_ratio().unwrap();
        assert!((doubled - 2.0 * r).abs() < 1e-12);

        for name in params.gamma.output.clone() {
            params.store.slice_mut(&name).unwrap()[0] = 0.0;
        }
        assert!(params.gamma_ratio().is_none());
    }

    #[test]
    fn fresh_ratio_concentrates_near_count_ratio() {
        // Law of large numbers over seeds; mean within 2% of 6/7.
        let config = ModelConfig {
            hidden_width: 4,
            ..ModelConfig::default()
        };
        let mut sum = 0.0;
        let trials = 1000;
        for seed in 0..trials {
            let p = init_params(&config, seed).unwrap();
            sum += p.gamma_ratio().unwrap();
        }
        let mean = sum / trials as f64;
        let expected = 6.0 / 7.0;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean ratio {mean} vs {expected}"
        );
    }

    #[test]
    fn census_covers_every_parameter() {
        let params = init_params(&small_config(), 5).unwrap();
        let census = describe(&params);
        let sum = census.embedding
            + census.embedding_block
            + census.interaction_blocks
            + census.output_blocks
            + census.single_blocks
            + census.branch;
        assert_eq!(sum, census.total);
        assert_eq!(census.gamma_registry.single.len(), 6);
        assert_eq!(census.gamma_registry.output.len(), 7);
    }

    #[test]
    fn element_row_lookup() {
        let params = init_params(&ModelConfig::default(), 0).unwrap();
        assert_eq!(params.element_row(1).unwrap(), 0);
        assert_eq!(params.element_row(9).unwrap(), 4);
        assert!(matches!(
            params.element_row(14),
            Err(ModelError::MissingEmbedding { z: 14 })
        ));
    }
}
