//! Energy unit conversion with a single pinned constants table.

use super::DataError;
use serde::{Deserialize, Serialize};

/// CODATA value, electronvolts per hartree.
pub const EV_PER_HARTREE: f64 = 27.211386245988;
/// Thermochemical kilocalories per mole, per electronvolt.
pub const KCAL_PER_MOL_PER_EV: f64 = 23.060547830619;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyUnit {
    Ha,
    Ev,
    Mev,
    KcalPerMol,
}

impl EnergyUnit {
    /// Conversion factor to electronvolts, the pivot unit.
    fn to_ev(self) -> f64 {
        match self {
            EnergyUnit::Ha => EV_PER_HARTREE,
            EnergyUnit::Ev => 1.0,
            EnergyUnit::Mev => 1e-3,
            EnergyUnit::KcalPerMol => 1.0 / KCAL_PER_MOL_PER_EV,
        }
    }
}

impl std::str::FromStr for EnergyUnit {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Ha" | "ha" | "hartree" => Ok(EnergyUnit::Ha),
            "eV" | "ev" => Ok(EnergyUnit::Ev),
            "meV" | "mev" => Ok(EnergyUnit::Mev),
            "kcal_per_mol" | "kcal/mol" => Ok(EnergyUnit::KcalPerMol),
            other => Err(DataError::UnknownUnit(other.to_string())),
        }
    }
}

impl std::fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EnergyUnit::Ha => "Ha",
            EnergyUnit::Ev => "eV",
            EnergyUnit::Mev => "meV",
            EnergyUnit::KcalPerMol => "kcal/mol",
        };
        f.write_str(s)
    }
}

/// Linear conversion between energy units.
pub fn convert_energy(value: f64, from: EnergyUnit, to: EnergyUnit) -> f64 {
    value * from.to_ev() / to.to_ev()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(convert_energy(0.0, EnergyUnit::Ha, EnergyUnit::Ev), 0.0);
    }

    #[test]
    fn hartree_to_ev_pinned() {
        let v = convert_energy(1.0, EnergyUnit::Ha, EnergyUnit::Ev);
        assert!((v - 27.211386245988).abs() < 1e-12);
    }

    #[test]
    fn ev_to_mev_is_metric() {
        let v = convert_energy(1.0, EnergyUnit::Ev, EnergyUnit::Mev);
        assert!((v - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn ev_to_kcal_pinned() {
        let v = convert_energy(1.0, EnergyUnit::Ev, EnergyUnit::KcalPerMol);
        assert!((v - 23.060547830619).abs() < 1e-12);
    }

    #[test]
    fn conversions_compose() {
        // Ha -> eV -> meV equals Ha -> meV to 1e-9 relative.
        let direct = convert_energy(3.7, EnergyUnit::Ha, EnergyUnit::Mev);
        let via = convert_energy(
            convert_energy(3.7, EnergyUnit::Ha, EnergyUnit::Ev),
            EnergyUnit::Ev,
            EnergyUnit::Mev,
        );
        assert!((direct - via).abs() / direct.abs() < 1e-9);
    }

    #[test]
    fn unknown_tag_rejected() {
        let err = "joule".parse::<EnergyUnit>();
        assert!(matches!(err, Err(DataError::UnknownUnit(t)) if t == "joule"));
    }

    #[test]
    fn round_trip_is_identity() {
        let v = convert_energy(
            convert_energy(2.5, EnergyUnit::KcalPerMol, EnergyUnit::Ha),
            EnergyUnit::Ha,
            EnergyUnit::KcalPerMol,
        );
        assert!((v - 2.5).abs() < 1e-12);
    }
}
