//! Fixed-width basis expansions of distances and angle cosines.

use serde::{Deserialize, Serialize};

use super::legendre::legendre_sequence;
use super::rational::rational_sequence;
use super::BasisError;

/// Radial expansion settings. Degrees run 1..=num_functions; degree 0 is
/// excluded from the expansion.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RadialBasisConfig {
    pub num_functions: usize,
    /// Cutoff radius in angstrom; also the upper end of the
    /// normalization grid.
    pub cutoff: f64,
    pub normalization_grid_points: usize,
}

impl Default for RadialBasisConfig {
    fn default() -> Self {
        Self {
            num_functions: 12,
            cutoff: 4.0,
            normalization_grid_points: 4096,
        }
    }
}

/// Angular expansion settings. Degrees run 1..=num_functions.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AngularBasisConfig {
    pub num_functions: usize,
}

impl Default for AngularBasisConfig {
    fn default() -> Self {
        Self { num_functions: 12 }
    }
}

/// Radial basis with per-degree normalization constants.
///
/// Each degree k is scaled by the maximum of |R_k| over a dense grid on
/// (0, cutoff], so every component of the expansion lies in [-1, 1] and
/// the scale matches the initial atom-embedding distribution. The table
/// is built once and is immutable afterwards.
#[derive(Clone, Debug)]
pub struct RadialBasisTable {
    config: RadialBasisConfig,
    norms: Vec<f64>,
}

impl RadialBasisTable {
    pub fn new(config: RadialBasisConfig) -> Result<Self, BasisError> {
        if config.num_functions == 0 {
            return Err(BasisError::InvalidConfig(
                "num_functions must be >= 1".into(),
            ));
        }
        if !config.cutoff.is_finite() || config.cutoff <= 0.0 {
            return Err(BasisError::InvalidConfig("cutoff must be > 0".into()));
        }
        if config.normalization_grid_points < 2 {
            return Err(BasisError::InvalidConfig(
                "normalization grid needs at least 2 points".into(),
            ));
        }
        let g = config.normalization_grid_points;
        let mut norms = vec![0.0f64; config.num_functions];
        for i in 0..g {
            let d = config.cutoff * (i + 1) as f64 / g as f64;
            let values = rational_sequence(config.num_functions, d)?;
            for k in 1..=config.num_functions {
                norms[k - 1] = norms[k - 1].max(values[k].abs());
            }
        }
        Ok(Self { config, norms })
    }

    pub fn config(&self) -> &RadialBasisConfig {
        &self.config
    }

    /// Per-degree normalization constants, degrees 1..=n.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Expand a distance into the normalized n-component radial vector.
    pub fn expand(&self, d: f64) -> Result<Vec<f64>, BasisError> {
        if !(d > 0.0 && d <= self.config.cutoff) {
            return Err(BasisError::DistanceOutOfRange {
                d,
                cutoff: self.config.cutoff,
            });
        }
        let values = rational_sequence(self.config.num_functions, d)?;
        Ok((1..=self.config.num_functions)
            .map(|k| values[k] / self.norms[k - 1])
            .collect())
    }
}

/// Expand an angle cosine into the m-component angular vector
/// Q_1(x), ..., Q_m(x). The cosine is clamped to [-1, 1].
pub fn expand_angle_cosine(cos_alpha: f64, cfg: &AngularBasisConfig) -> Vec<f64> {
    let seq = legendre_sequence(cfg.num_functions, cos_alpha.clamp(-1.0, 1.0));
    seq[1..=cfg.num_functions].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::legendre_rational;

    #[test]
    fn components_bounded_by_one() {
        let table = RadialBasisTable::new(RadialBasisConfig::default()).unwrap();
        for i in 0..500 {
            let d = 4.0 * (i + 1) as f64 / 500.0;
            for (k, v) in table.expand(d).unwrap().iter().enumerate() {
                assert!(v.abs() <= 1.0 + 1e-12, "degree {} at d={d}: {v}", k + 1);
            }
        }
    }

    #[test]
    fn boundary_distance_is_finite() {
        let table = RadialBasisTable::new(RadialBasisConfig::default()).unwrap();
        let v = table.expand(4.0).unwrap();
        assert_eq!(v.len(), 12);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn out_of_range_distances_rejected() {
        let table = RadialBasisTable::new(RadialBasisConfig::default()).unwrap();
        assert!(table.expand(0.0).is_err());
        assert!(table.expand(-1.0).is_err());
        assert!(table.expand(4.0 + 1e-9).is_err());
    }

    #[test]
    fn grid_argmax_attains_unit_magnitude() {
        // Independently recompute the degree-1 grid maximum and check the
        // expansion hits +-1 there.
        let cfg = RadialBasisConfig::default();
        let table = RadialBasisTable::new(cfg.clone()).unwrap();
        let g = cfg.normalization_grid_points;
        let mut best_d = 0.0;
        let mut best = 0.0f64;
        for i in 0..g {
            let d = cfg.cutoff * (i + 1) as f64 / g as f64;
            let v = legendre_rational(1, d).unwrap().abs();
            if v > best {
                best = v;
                best_d = d;
            }
        }
        let component = table.expand(best_d).unwrap()[0];
        assert!((component.abs() - 1.0).abs() < 1e-6, "got {component}");
    }

    #[test]
    fn angular_expansion_identities() {
        let cfg = AngularBasisConfig::default();
        let at_one = expand_angle_cosine(1.0, &cfg);
        assert!(at_one.iter().all(|&v| (v - 1.0).abs() < 1e-13));

        let at_minus_one = expand_angle_cosine(-1.0, &cfg);
        for (idx, &v) in at_minus_one.iter().enumerate() {
            let k = idx + 1;
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - expected).abs() < 1e-13);
        }

        let at_zero = expand_angle_cosine(0.0, &cfg);
        for (idx, &v) in at_zero.iter().enumerate() {
            if (idx + 1) % 2 == 1 {
                assert!(v.abs() < 1e-13, "odd degree {} should vanish: {v}", idx + 1);
            }
        }
    }

    #[test]
    fn cosine_clamped_before_expansion() {
        let cfg = AngularBasisConfig::default();
        let drifted = expand_angle_cosine(1.0 + 5e-13, &cfg);
        let exact = expand_angle_cosine(1.0, &cfg);
        assert_eq!(drifted, exact);
    }
}
