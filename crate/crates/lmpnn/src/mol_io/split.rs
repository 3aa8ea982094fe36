//! Deterministic dataset splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub valid_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// Split ids into train/valid/test. Valid and test sizes are
/// floor(n * fraction); the remainder goes to train. The shuffle is a
/// deterministic function of the seed.
pub fn split_dataset(
    ids: &[String],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    if ids.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let (ft, fv, fs) = fractions;
    if (ft + fv + fs - 1.0).abs() > 1e-9 || ft < 0.0 || fv < 0.0 || fs < 0.0 {
        return Err(DataError::BadFractions([ft, fv, fs]));
    }
    let n = ids.len();
    let n_valid = (n as f64 * fv).floor() as usize;
    let n_test = (n as f64 * fs).floor() as usize;
    let n_train = n - n_valid - n_test;

    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let train_ids = shuffled[..n_train].to_vec();
    let valid_ids = shuffled[n_train..n_train + n_valid].to_vec();
    let test_ids = shuffled[n_train + n_valid..].to_vec();
    Ok(DatasetSplit {
        train_ids,
        valid_ids,
        test_ids,
        seed,
    })
}
