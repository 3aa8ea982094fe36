//! Directory- and file-level dataset loading.

use std::collections::HashSet;
use std::path::Path;

use super::{parse_extended_xyz, parse_trajectory, DataError, Molecule, ParseMode};

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load every `.xyz` file in a directory (sorted by file name). Files may
/// be parsed concurrently upstream; this loader is deliberately
/// sequential and deterministic. Molecules whose id (or file stem)
/// appears in `exclude` are dropped.
pub fn load_dataset_dir(
    dir: &Path,
    mode: ParseMode,
    exclude: Option<&HashSet<String>>,
) -> Result<Vec<Molecule>, DataError> {
    let entries = std::fs::read_dir(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "xyz").unwrap_or(false))
        .collect();
    paths.sort();

    let mut molecules = Vec::with_capacity(paths.len());
    for path in &paths {
        let text = read(path)?;
        let mut mol = parse_extended_xyz(&text, mode)?;
        if mol.id.is_empty() {
            mol.id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        if let Some(set) = exclude {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if set.contains(&mol.id) || set.contains(&stem) {
                continue;
            }
        }
        molecules.push(mol);
    }
    if molecules.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(molecules)
}

/// Load a multi-frame trajectory file.
pub fn load_trajectory_file(path: &Path) -> Result<Vec<Molecule>, DataError> {
    let text = read(path)?;
    let frames = parse_trajectory(&text, ParseMode::Plain)?;
    if frames.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(frames)
}

/// Read an exclusion-id file: one id per line, `#` comments and blank
/// lines ignored.
pub fn load_exclusion_file(path: &Path) -> Result<HashSet<String>, DataError> {
    let text = read(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_string())
        .collect())
}
