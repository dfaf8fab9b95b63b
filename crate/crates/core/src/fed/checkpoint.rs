//! Flat little-endian f32 tensor file plus a JSON manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{GlobalModel, NamedTensor};
use crate::error::{Error, Result};

pub const WEIGHTS_FILE: &str = "model.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub round: usize,
    pub dataset_fingerprint: String,
    pub dropout: f64,
    pub tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(model: &GlobalModel, dataset_fingerprint: &str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for t in model.tensors() {
        for &v in &t.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: t.name,
            shape: t.shape,
            offset,
        });
        offset += t.data.len();
    }
    fs::write(dir.join(WEIGHTS_FILE), bytes)?;
    let manifest = Manifest {
        dtype: "f32-le".into(),
        round: model.round,
        dataset_fingerprint: dataset_fingerprint.to_string(),
        dropout: model.gcn.dropout,
        tensors,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads into a model shaped like `template`; the dataset fingerprint must match.
pub fn load_checkpoint(dir: &Path, template: &GlobalModel, dataset_fingerprint: &str) -> Result<GlobalModel> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.dataset_fingerprint != dataset_fingerprint {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint was trained on dataset {} but the config resolves to {}",
            manifest.dataset_fingerprint, dataset_fingerprint
        )));
    }
    if manifest.dtype != "f32-le" {
        return Err(Error::CheckpointMismatch(format!("unsupported dtype {}", manifest.dtype)));
    }
    let bytes = fs::read(dir.join(WEIGHTS_FILE))?;
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let tensors = manifest
        .tensors
        .iter()
        .map(|e| {
            let len: usize = e.shape.iter().product();
            let data = values
                .get(e.offset..e.offset + len)
                .ok_or_else(|| Error::CheckpointMismatch(format!("tensor {} runs past the end of {WEIGHTS_FILE}", e.name)))?
                .to_vec();
            Ok(NamedTensor {
                name: e.name.clone(),
                shape: e.shape.clone(),
                data,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = template.clone();
    model
        .load_tensors(&tensors)
        .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
    model.round = manifest.round;
    model.gcn.dropout = manifest.dropout;
    Ok(model)
}
