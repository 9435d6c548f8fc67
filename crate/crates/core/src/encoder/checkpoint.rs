//! Checkpoint file: magic, format version, a length-prefixed JSON header and
//! the parameter values as little-endian `f64` in declared tensor order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{Parameters, TensorSpec};
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

const MAGIC: &[u8; 4] = b"CQCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub tensors: Vec<TensorSpec>,
    pub seed: u64,
    /// Optimizer steps taken so far across all stages.
    pub step: u64,
    /// Scheme, stages, corpus hashes and losses; free-form JSON.
    pub provenance: serde_json::Value,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Parameters,
}

impl Checkpoint {
    pub fn new(params: Parameters, vocabulary: Vocabulary, seed: u64, step: u64, provenance: serde_json::Value) -> Result<Self> {
        if vocabulary.len() != params.config.vocab_size {
            return Err(Error::Shape(format!(
                "vocabulary of {} tokens for a model of {}",
                vocabulary.len(),
                params.config.vocab_size
            )));
        }
        Ok(Checkpoint {
            header: CheckpointHeader {
                config: params.config.clone(),
                tensors: params.specs.clone(),
                seed,
                step,
                provenance,
                vocabulary,
            },
            params,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.params.n_values() * 8);
        for v in self.params.tensors.iter().flatten() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated checkpoint".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header).map_err(|_| Error::Format("truncated checkpoint header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        let mut params = Parameters::zeros(&header.config)?;
        if params.specs != header.tensors {
            return Err(Error::Format("checkpoint tensor list does not match its config".into()));
        }
        if header.vocabulary.len() != header.config.vocab_size {
            return Err(Error::Format("checkpoint vocabulary does not match its config".into()));
        }
        let mut bytes = vec![0u8; params.n_values() * 8];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated checkpoint data".into()))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after checkpoint data".into()));
        }
        let mut chunks = bytes.chunks_exact(8);
        for v in params.tensors.iter_mut().flatten() {
            let c = chunks.next().expect("sized above");
            *v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
        }
        Ok(Checkpoint { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}
