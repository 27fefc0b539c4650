//! Versioned binary parameter container.
//!
//! Layout: 4-byte magic `DOCR`, u32 format version, u64 header length,
//! JSON header (model config echo, training provenance incl. the evidence
//! coefficient, vocabulary content hashes, tensor manifest), then every
//! tensor's values as little-endian f64 in manifest order. The manifest
//! mirrors the bank's sorted name order, so save/load round-trips are
//! byte-stable.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelConfig;
use crate::params::ParamBank;

pub const MAGIC: [u8; 4] = *b"DOCR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("checkpoint io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint format version {got} (expected {FORMAT_VERSION})")]
    BadVersion { got: u32 },
    #[error("checkpoint header is not valid JSON: {0}")]
    Header(#[source] serde_json::Error),
    #[error("tensor {name} expects {expected} values but shape gives {got}")]
    ManifestShape {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("checkpoint ends early inside tensor {name}")]
    Truncated { name: String },
    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelConfig,
    /// Evidence-loss coefficient the parameters were trained with.
    pub beta: f64,
    pub root_seed: u64,
    pub token_vocab_hash: String,
    pub relation_vocab_hash: String,
    /// Full training configuration for provenance; shape not load-bearing.
    pub train_echo: serde_json::Value,
    pub manifest: Vec<ManifestEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_checkpoint(
    path: &Path,
    header: &CheckpointHeader,
    bank: &ParamBank,
) -> Result<(), CheckpointError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let header_bytes = serde_json::to_vec(header).map_err(CheckpointError::Header)?;
    w.write_all(&MAGIC).map_err(io_err(path))?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(io_err(path))?;
    w.write_all(&header_bytes).map_err(io_err(path))?;
    for entry in &header.manifest {
        let tensor = bank.get(&entry.name);
        for &x in &tensor.values {
            w.write_all(&x.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Header whose manifest mirrors the bank's sorted tensor order.
pub fn header_for(
    model: ModelConfig,
    beta: f64,
    root_seed: u64,
    token_vocab_hash: String,
    relation_vocab_hash: String,
    train_echo: serde_json::Value,
    bank: &ParamBank,
) -> CheckpointHeader {
    let manifest = bank
        .iter()
        .map(|(name, t)| ManifestEntry {
            name: name.clone(),
            shape: t.shape.clone(),
        })
        .collect();
    CheckpointHeader {
        format_version: FORMAT_VERSION,
        model,
        beta,
        root_seed,
        token_vocab_hash,
        relation_vocab_hash,
        train_echo,
        manifest,
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ParamBank), CheckpointError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err(path))?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b).map_err(io_err(path))?;
    let version = u32::from_le_bytes(u32b);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion { got: version });
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b).map_err(io_err(path))?;
    let header_len = u64::from_le_bytes(u64b) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes).map_err(io_err(path))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&header_bytes).map_err(CheckpointError::Header)?;

    let mut bank = ParamBank::new();
    for entry in &header.manifest {
        let len: usize = entry.shape.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf).map_err(|_| CheckpointError::Truncated {
                name: entry.name.clone(),
            })?;
            values.push(f64::from_le_bytes(buf));
        }
        bank.insert(&entry.name, entry.shape.clone(), values);
    }
    Ok((header, bank))
}

/// Guard for inference: the checkpoint must have been trained against the
/// same relation inventory it is now asked to score.
pub fn require_relation_hash(
    header: &CheckpointHeader,
    relation_vocab_hash: &str,
) -> Result<(), CheckpointError> {
    if header.relation_vocab_hash != relation_vocab_hash {
        return Err(CheckpointError::Incompatible(format!(
            "relation vocabulary hash {} does not match checkpoint's {}",
            relation_vocab_hash, header.relation_vocab_hash
        )));
    }
    Ok(())
}

/// Guard for the fused mode that pairs a primary model with a companion
/// trained without the evidence objective.
pub fn require_no_evidence_training(header: &CheckpointHeader) -> Result<(), CheckpointError> {
    if header.beta != 0.0 {
        return Err(CheckpointError::Incompatible(format!(
            "companion checkpoint was trained with evidence coefficient {}, expected 0",
            header.beta
        )));
    }
    Ok(())
}
