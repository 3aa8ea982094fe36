//! Molecule dataset ingestion: extended-XYZ parsing, unit conversion,
//! and train/valid/test splits.

mod dataset;
mod parse;
mod split;
mod units;

pub use dataset::{load_dataset_dir, load_exclusion_file, load_trajectory_file};
pub use parse::{parse_extended_xyz, parse_trajectory, to_extended_xyz, ParseMode};
pub use split::{split_dataset, DatasetSplit};
pub use units::{convert_energy, EnergyUnit, EV_PER_HARTREE, KCAL_PER_MOL_PER_EV};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A parsed molecule record: atom types, coordinates in angstrom, and
/// whatever target values the source file carried.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Molecule {
    pub id: String,
    pub atomic_numbers: Vec<u8>,
    /// Cartesian coordinates, angstrom.
    pub positions: Vec<[f64; 3]>,
    /// Target values keyed by canonical name (`u0`, `mu`, ..., or `energy`
    /// for MD frames), in the source's native units.
    pub targets: std::collections::BTreeMap<String, f64>,
    /// Reference forces for MD frames, when the file carries them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<Vec<[f64; 3]>>,
}

impl Molecule {
    pub fn num_atoms(&self) -> usize {
        self.atomic_numbers.len()
    }
}

/// Canonical names of the twelve QM9 targets, in property-line order.
pub const QM9_TARGETS: [&str; 12] = [
    "mu", "alpha", "homo", "lumo", "gap", "r2", "zpve", "u0", "u", "h", "g", "cv",
];

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed atom count: {reason}")]
    MalformedAtomCount { line: usize, reason: String },
    #[error("line {line}: unknown element symbol '{symbol}'")]
    UnknownElement { line: usize, symbol: String },
    #[error("line {line}: non-numeric coordinate field '{token}'")]
    NonNumericCoordinate { line: usize, token: String },
    #[error("line {line}: property record has {found} fields, expected at least {expected}")]
    MissingPropertyField {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: non-numeric property field '{token}'")]
    NonNumericProperty { line: usize, token: String },
    #[error("line {line}: atom line has {found} fields, expected {expected}")]
    MalformedAtomLine {
        line: usize,
        found: usize,
        expected: String,
    },
    #[error("line {line}: non-finite coordinate")]
    NonFiniteCoordinate { line: usize },
    #[error("file ends at line {line}, expected {expected} atom lines")]
    UnexpectedEof { line: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split fractions {0:?} do not sum to 1")]
    BadFractions([f64; 3]),
    #[error("unknown energy unit tag '{0}'")]
    UnknownUnit(String),
    #[error("molecule {id} is missing target '{target}'")]
    MissingTarget { id: String, target: String },
}
