//! Parameter checkpoints: one file holding a JSON manifest plus
//! little-endian f64 payloads.
//!
//! Layout:
//! ```text
//! magic  b"LMPN"
//! u32 LE format version
//! u64 LE manifest byte length
//! manifest (JSON)
//! payload: parameter values, then Adam first and second moments when
//!          present, all little-endian f64 in manifest order
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tape::Shape;
use super::AdamState;

const MAGIC: &[u8; 4] = b"LMPN";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("manifest decode failed: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("payload truncated: expected {expected} floats, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] super::TensorError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamMeta {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub params: Vec<ParamMeta>,
    /// Current values of every scalar gate, keyed by parameter name.
    pub gamma: BTreeMap<String, f64>,
    pub adam: Option<AdamMeta>,
    /// Caller-defined metadata (target name, standardization constants,
    /// model configuration, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub struct Checkpoint {
    pub store: ParamStore,
    pub adam: Option<AdamState>,
    pub manifest: CheckpointManifest,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write a checkpoint. `gamma_names` selects which parameters are listed
/// in the manifest's gamma table (they must be scalars).
pub fn save_checkpoint(
    path: &Path,
    store: &ParamStore,
    adam: Option<&AdamState>,
    gamma_names: &[String],
    extra: serde_json::Value,
) -> Result<(), CheckpointError> {
    let mut gamma = BTreeMap::new();
    for name in gamma_names {
        gamma.insert(name.clone(), store.scalar(name)?);
    }
    let manifest = CheckpointManifest {
        format_version: VERSION,
        params: store
            .entries()
            .iter()
            .map(|e| ParamMeta {
                name: e.name.clone(),
                rows: e.shape.rows,
                cols: e.shape.cols,
            })
            .collect(),
        gamma,
        adam: adam.map(|a| AdamMeta {
            step: a.step,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
        }),
        extra,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(MAGIC).map_err(io_err(path))?;
    file.write_all(&VERSION.to_le_bytes()).map_err(io_err(path))?;
    file.write_all(&(manifest_bytes.len() as u64).to_le_bytes())
        .map_err(io_err(path))?;
    file.write_all(&manifest_bytes).map_err(io_err(path))?;

    let mut write_floats = |values: &[f64]| -> Result<(), CheckpointError> {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&buf).map_err(io_err(path))
    };
    write_floats(store.data())?;
    if let Some(a) = adam {
        write_floats(&a.first_moment)?;
        write_floats(&a.second_moment)?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(io_err(path))?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut version = [0u8; 4];
    file.read_exact(&mut version).map_err(io_err(path))?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut len = [0u8; 8];
    file.read_exact(&mut len).map_err(io_err(path))?;
    let mut manifest_bytes = vec![0u8; u64::from_le_bytes(len) as usize];
    file.read_exact(&mut manifest_bytes).map_err(io_err(path))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&manifest_bytes)?;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(io_err(path))?;
    let floats: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let num_params: usize = manifest.params.iter().map(|p| p.rows * p.cols).sum();
    let expected = num_params + if manifest.adam.is_some() { 2 * num_params } else { 0 };
    if floats.len() < expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: floats.len(),
        });
    }

    let mut store = ParamStore::new();
    let mut cursor = 0usize;
    for p in &manifest.params {
        let n = p.rows * p.cols;
        store.add(
            &p.name,
            Shape::new(p.rows, p.cols),
            floats[cursor..cursor + n].to_vec(),
        )?;
        cursor += n;
    }
    let adam = manifest.adam.as_ref().map(|meta| AdamState {
        step: meta.step,
        first_moment: floats[cursor..cursor + num_params].to_vec(),
        second_moment: floats[cursor + num_params..cursor + 2 * num_params].to_vec(),
        beta1: meta.beta1,
        beta2: meta.beta2,
        epsilon: meta.epsilon,
    });

    Ok(Checkpoint {
        store,
        adam,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_adam_and_extra() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.ckpt");

        let mut store = ParamStore::new();
        store
            .add("w", Shape::new(2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        store.add("blk.gamma", Shape::scalar(), vec![1.25]).unwrap();
        let mut adam = AdamState::new(store.num_values());
        adam.step = 17;
        adam.first_moment[2] = 0.5;

        save_checkpoint(
            &path,
            &store,
            Some(&adam),
            &["blk.gamma".to_string()],
            serde_json::json!({"target": "u0", "mean": -40.0}),
        )
        .unwrap();

        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.store.data(), store.data());
        assert_eq!(ck.manifest.gamma["blk.gamma"], 1.25);
        let adam_back = ck.adam.unwrap();
        assert_eq!(adam_back.step, 17);
        assert_eq!(adam_back.first_moment[2], 0.5);
        assert_eq!(ck.manifest.extra["target"], "u0");
    }

    #[test]
    fn bad_magic_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("junk.ckpt");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadMagic)
        ));
    }
}
