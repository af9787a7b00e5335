//! Checkpoint directory layout: `manifest.json` (configs, vocabulary, dev
//! metrics, parameter table) plus `weights.bin`, the parameters concatenated
//! row-major as little-endian 32-bit floats at the manifest offsets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Vocabulary, VocabularyData};
use crate::metrics::EvalReport;
use crate::model::{ConfigError, ModelConfig, ModelParams};
use crate::scalar::Scalar;

use super::run::TrainConfig;

const FORMAT: &str = "slu-checkpoint/1";

/// A trained model with everything needed to reload and evaluate it.
#[derive(Debug, Clone)]
pub struct Checkpoint<S> {
    pub params: ModelParams<S>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub vocab: Vocabulary,
    pub dev_metrics: Option<EvalReport>,
    /// Epoch the kept parameters come from.
    pub epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    dtype: String,
    epoch: usize,
    model: ModelConfig,
    train: TrainConfig,
    vocab: VocabularyData,
    dev_metrics: Option<EvalReport>,
    params: Vec<ParamRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into `weights.bin`.
    offset: u64,
    /// Element count.
    len: usize,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format {0:?}")]
    BadFormat(String),
    #[error("unsupported weight dtype {0:?}")]
    BadDtype(String),
    #[error("weights.bin is {actual} bytes, manifest expects {expected}")]
    BlobLength { expected: u64, actual: u64 },
    #[error("parameter {name}: manifest shape {manifest:?} does not match model shape {model:?}")]
    ShapeMismatch {
        name: String,
        manifest: Vec<usize>,
        model: Vec<usize>,
    },
    #[error("manifest parameter {index} is {manifest:?}, model expects {model:?}")]
    NameMismatch {
        index: usize,
        manifest: String,
        model: String,
    },
    #[error("manifest lists {manifest} parameters, model expects {model}")]
    ParamCount { manifest: usize, model: usize },
    #[error("parameter {0}: offset/length outside the weight blob")]
    BadOffset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Write `manifest.json` and `weights.bin` into `dir` (created if absent).
/// Weights are stored as little-endian f32 regardless of the in-memory
/// precision, so save -> load -> save is byte-identical.
pub fn save_checkpoint<S: Scalar>(
    ckpt: &Checkpoint<S>,
    dir: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let named = ckpt.params.named();
    let mut records = Vec::with_capacity(named.len());
    let mut blob = Vec::new();
    for p in &named {
        records.push(ParamRecord {
            name: p.name.clone(),
            shape: p.tensor.shape.clone(),
            offset: blob.len() as u64,
            len: p.tensor.numel(),
        });
        for v in &p.tensor.data {
            blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        dtype: "f32".to_string(),
        epoch: ckpt.epoch,
        model: ckpt.model.clone(),
        train: ckpt.train.clone(),
        vocab: VocabularyData::from(&ckpt.vocab),
        dev_metrics: ckpt.dev_metrics.clone(),
        params: records,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    fs::write(dir.join("weights.bin"), blob)?;
    Ok(())
}

/// Load a checkpoint directory, validating shapes and the blob length
/// before accepting any weight.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint<f32>, CheckpointError> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != FORMAT {
        return Err(CheckpointError::BadFormat(manifest.format));
    }
    if manifest.dtype != "f32" {
        return Err(CheckpointError::BadDtype(manifest.dtype));
    }
    manifest.model.validate()?;
    let vocab = Vocabulary::from(manifest.vocab);
    let blob = fs::read(dir.join("weights.bin"))?;

    let expected: u64 = manifest.params.iter().map(|r| r.len as u64 * 4).sum();
    if blob.len() as u64 != expected {
        return Err(CheckpointError::BlobLength {
            expected,
            actual: blob.len() as u64,
        });
    }

    let mut params = ModelParams::<f32>::init(&manifest.model, vocab.n_tokens(), 0);
    let mut named = params.named_mut();
    if named.len() != manifest.params.len() {
        return Err(CheckpointError::ParamCount {
            manifest: manifest.params.len(),
            model: named.len(),
        });
    }
    for (index, (dst, record)) in named.iter_mut().zip(&manifest.params).enumerate() {
        if dst.name != record.name {
            return Err(CheckpointError::NameMismatch {
                index,
                manifest: record.name.clone(),
                model: dst.name.clone(),
            });
        }
        if dst.tensor.shape != record.shape || dst.tensor.numel() != record.len {
            return Err(CheckpointError::ShapeMismatch {
                name: record.name.clone(),
                manifest: record.shape.clone(),
                model: dst.tensor.shape.clone(),
            });
        }
        let start = record.offset as usize;
        let end = start + record.len * 4;
        if end > blob.len() {
            return Err(CheckpointError::BadOffset(record.name.clone()));
        }
        for (j, chunk) in blob[start..end].chunks_exact(4).enumerate() {
            dst.tensor.data[j] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    Ok(Checkpoint {
        params,
        model: manifest.model,
        train: manifest.train,
        vocab,
        dev_metrics: manifest.dev_metrics,
        epoch: manifest.epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Utterance};

    fn tiny_checkpoint() -> Checkpoint<f32> {
        let train = vec![Utterance::new(
            vec!["play".into(), "jazz".into()],
            vec!["O".into(), "B-music".into()],
            vec!["PlayMusic".into()],
        )
        .unwrap()];
        let vocab = build_vocab(&train, false).unwrap();
        let model = ModelConfig::micro().with_vocab(&vocab);
        let params = ModelParams::init(&model, vocab.n_tokens(), 3);
        Checkpoint {
            params,
            model,
            train: TrainConfig::default(),
            vocab,
            dev_metrics: None,
            epoch: 1,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a");
        let second = dir.path().join("b");
        let ckpt = tiny_checkpoint();
        save_checkpoint(&ckpt, &first).unwrap();
        let loaded = load_checkpoint(&first).unwrap();
        save_checkpoint(&loaded, &second).unwrap();
        assert_eq!(
            fs::read(first.join("weights.bin")).unwrap(),
            fs::read(second.join("weights.bin")).unwrap()
        );
        assert_eq!(
            fs::read(first.join("manifest.json")).unwrap(),
            fs::read(second.join("manifest.json")).unwrap()
        );
        assert_eq!(ckpt.params, loaded.params);
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck");
        save_checkpoint(&tiny_checkpoint(), &path).unwrap();
        let blob = fs::read(path.join("weights.bin")).unwrap();
        fs::write(path.join("weights.bin"), &blob[..blob.len() - 4]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BlobLength { .. })
        ));
    }

    #[test]
    fn manifest_shape_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck");
        save_checkpoint(&tiny_checkpoint(), &path).unwrap();
        // transpose the embedding's recorded shape; the element count is
        // unchanged so only the shape check can catch it
        let mut manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path.join("manifest.json")).unwrap()).unwrap();
        let shape = &mut manifest["params"][0]["shape"];
        assert_eq!(shape.as_array().unwrap().len(), 2);
        let swapped = serde_json::json!([shape[1], shape[0]]);
        *shape = swapped;
        fs::write(path.join("manifest.json"), manifest.to_string()).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn foreign_format_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck");
        save_checkpoint(&tiny_checkpoint(), &path).unwrap();
        let manifest = fs::read_to_string(path.join("manifest.json")).unwrap();
        fs::write(
            path.join("manifest.json"),
            manifest.replace(FORMAT, "other/9"),
        )
        .unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadFormat(_))
        ));
    }
}
