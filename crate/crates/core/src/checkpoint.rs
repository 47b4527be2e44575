//! Binary checkpoint archive.
//!
//! Layout: the magic bytes, a little-endian `u64` manifest length, the JSON
//! manifest, a `u64` entry count, then per entry a `u32` name length, the
//! UTF-8 name, a `u32` rank, `rank` little-endian `u64` dimensions and the
//! raw little-endian `f64` values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::metrics::MetricReport;
use crate::model::{Model, ModelConfig, ModelError};
use crate::numeric::{ParamStore, Tensor};
use crate::train::TrainingConfig;

const MAGIC: &[u8; 8] = b"TPRCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("vocabulary hash {found} does not match checkpoint vocabulary {expected}")]
    VocabularyMismatch { expected: String, found: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub topics: usize,
    pub embedding_dim: usize,
    pub topic_proj_dim: usize,
    pub pool_proj_dim: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub config_hash: String,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    /// Completed training epochs; 0 is the initialization.
    pub epoch: usize,
    pub validation: Option<MetricReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub model: Model,
}

/// SHA-256 of the canonical JSON of both configs.
pub fn config_hash(model: &ModelConfig, training: &TrainingConfig) -> String {
    let json = serde_json::to_string(&(model, training)).expect("configs serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl Checkpoint {
    pub fn new(
        model: Model,
        training: &TrainingConfig,
        vocab_hash: &str,
        epoch: usize,
        validation: Option<MetricReport>,
    ) -> Self {
        let cfg = model.config().clone();
        let validation = validation.filter(|v| v.values().iter().all(|x| x.is_finite()));
        let mut model = model;
        model.store_mut().zero_grads();
        Checkpoint {
            manifest: CheckpointManifest {
                format_version: FORMAT_VERSION,
                topics: cfg.topics,
                embedding_dim: cfg.embedding_dim,
                topic_proj_dim: cfg.topic_proj_dim,
                pool_proj_dim: cfg.pool_proj_dim,
                vocab_size: model.vocab_size(),
                vocab_hash: vocab_hash.to_string(),
                config_hash: config_hash(&cfg, training),
                model: cfg,
                training: training.clone(),
                epoch,
                validation,
            },
            model,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest).expect("manifest serializes");
        let store = self.model.store();
        let mut out = Vec::with_capacity(64 + manifest.len() + 8 * store.total_coordinates());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(store.len() as u64).to_le_bytes());
        for p in store.iter() {
            let name = p.name().as_bytes();
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name);
            let shape = p.value().shape();
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in p.value().data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(CheckpointError::Format("bad magic bytes".into()));
        }
        let len = r.u64()? as usize;
        let manifest: CheckpointManifest = serde_json::from_slice(r.take(len)?)
            .map_err(|e| CheckpointError::Format(format!("manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Format(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        let count = r.u64()?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| CheckpointError::Format(format!("{name}: shape overflows")))?;
            let raw = r.take(
                n.checked_mul(8)
                    .ok_or_else(|| CheckpointError::Format("size overflow".into()))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Format(e.to_string()))?;
            store
                .insert(name, t)
                .map_err(|e| CheckpointError::Format(e.to_string()))?;
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Format("trailing bytes".into()));
        }
        let model = Model::from_store(manifest.model.clone(), store)?;
        if model.vocab_size() != manifest.vocab_size {
            return Err(CheckpointError::Format(
                "embedding rows disagree with manifest vocabulary size".into(),
            ));
        }
        Ok(Checkpoint { manifest, model })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), CheckpointError> {
        let found = vocab.hash();
        if found != self.manifest.vocab_hash || vocab.len() != self.manifest.vocab_size {
            return Err(CheckpointError::VocabularyMismatch {
                expected: self.manifest.vocab_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Format("unexpected end of archive".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}
