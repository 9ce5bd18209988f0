//! Model persistence: a versioned JSON file bundling the configuration,
//! the vocabulary it was trained with, and every parameter tensor by name.
//! Writes go through a temporary file in the target directory and a rename,
//! so a crash never leaves a half-written checkpoint behind.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::features::Vocab;

use super::{Params, TaggerConfig, TaggerError, TaggerModel};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: TaggerConfig,
    vocab: Vocab,
    tensors: Vec<(String, TensorData)>,
}

/// Writes the model and its vocabulary to `path` atomically.
pub fn save_checkpoint(path: &Path, model: &TaggerModel, vocab: &Vocab) -> Result<(), TaggerError> {
    let tensors = model
        .params
        .entries()
        .into_iter()
        .map(|(name, tensor)| {
            let data = TensorData {
                rows: tensor.nrows(),
                cols: tensor.ncols(),
                data: tensor.iter().copied().collect(),
            };
            (name, data)
        })
        .collect();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        vocab: vocab.clone(),
        tensors,
    };
    let json = serde_json::to_string(&file).map_err(|e| TaggerError::Malformed(e.to_string()))?;

    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let tmp = NamedTempFile::new_in(dir)?;
    fs::write(tmp.path(), json)?;
    tmp.persist(path).map_err(|e| TaggerError::Io(e.error))?;
    Ok(())
}

/// Reads a checkpoint back into a model and its vocabulary, verifying the
/// version, the configuration, and every tensor's name and shape.
pub fn load_checkpoint(path: &Path) -> Result<(TaggerModel, Vocab), TaggerError> {
    let json = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&json).map_err(|e| TaggerError::Malformed(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(TaggerError::UnsupportedVersion {
            found: file.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    file.config.validate()?;

    let mut params = Params::zeros(&file.config, file.vocab.word_count(), file.vocab.char_count());
    let mut slots = params.entries_mut();
    if slots.len() != file.tensors.len() {
        return Err(TaggerError::Malformed(format!(
            "expected {} tensors, found {}",
            slots.len(),
            file.tensors.len()
        )));
    }
    for ((expected_name, slot), (name, tensor)) in slots.iter_mut().zip(file.tensors) {
        if *expected_name != name {
            return Err(TaggerError::Malformed(format!(
                "tensor {name} out of place, expected {expected_name}"
            )));
        }
        if tensor.data.len() != tensor.rows * tensor.cols
            || (tensor.rows, tensor.cols) != slot.dim()
        {
            return Err(TaggerError::Malformed(format!(
                "tensor {name} has shape {}x{} with {} values, expected {}x{}",
                tensor.rows,
                tensor.cols,
                tensor.data.len(),
                slot.nrows(),
                slot.ncols()
            )));
        }
        **slot = Array2::from_shape_vec((tensor.rows, tensor.cols), tensor.data)
            .map_err(|e| TaggerError::Malformed(e.to_string()))?;
    }
    drop(slots);

    Ok((TaggerModel { config: file.config, params }, file.vocab))
}
