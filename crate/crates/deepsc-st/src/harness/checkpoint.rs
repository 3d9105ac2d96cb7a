//! Checkpoint persistence.
//!
//! Layout (all integers little-endian):
//!   magic "DSCST001" (8 bytes)
//!   u32 tensor count
//!   per tensor: u32 name length, UTF-8 name, u32 rank, rank x u32 dims,
//!               IEEE 754 binary32 data
//!
//! Hyperparameters travel as scalar tensors under `hparams.`; weights keep
//! their model names. Tensors are written in name order, so identical models
//! serialize to identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::codec::{Model, ModelConfig};
use crate::nn::{ModelParams, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DSCST001";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(String),
    #[error("malformed tensor entry: {0}")]
    BadTensor(String),
    #[error("checkpoint is missing hyperparameters")]
    MissingHyperparams,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn checkpoint_save(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    let mut entries: BTreeMap<String, Tensor> = BTreeMap::new();
    for (name, value) in model.config.to_fields() {
        entries.insert(format!("hparams.{name}"), Tensor::scalar(value as f64));
    }
    for (name, t) in model.params.iter() {
        entries.insert(name.clone(), t.clone());
    }
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in &entries {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf)
        .map_err(|_| CheckpointError::Truncated(what.to_string()))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn checkpoint_load(path: &Path) -> Result<Model, CheckpointError> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    read_exact(&mut f, &mut magic, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic {
            expected: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let count = read_u32(&mut f, "tensor count")?;
    let mut hparams: BTreeMap<String, usize> = BTreeMap::new();
    let mut params = ModelParams::new();
    for i in 0..count {
        let ctx = format!("tensor {i}");
        let name_len = read_u32(&mut f, &ctx)? as usize;
        if name_len > 4096 {
            return Err(CheckpointError::BadTensor(format!(
                "{ctx}: name length {name_len}"
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut f, &mut name_bytes, &ctx)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| CheckpointError::BadTensor(format!("{ctx}: {e}")))?;
        let rank = read_u32(&mut f, &name)? as usize;
        if rank > 8 {
            return Err(CheckpointError::BadTensor(format!("{name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len = 1usize;
        for _ in 0..rank {
            let d = read_u32(&mut f, &name)? as usize;
            if d == 0 || len.saturating_mul(d) > 1 << 30 {
                return Err(CheckpointError::BadTensor(format!("{name}: shape")));
            }
            len *= d;
            shape.push(d);
        }
        let mut data = Vec::with_capacity(len);
        let mut b = [0u8; 4];
        for _ in 0..len {
            read_exact(&mut f, &mut b, &name)?;
            data.push(f32::from_le_bytes(b) as f64);
        }
        if let Some(field) = name.strip_prefix("hparams.") {
            hparams.insert(field.to_string(), data[0] as usize);
        } else {
            let t = Tensor::from_vec(shape, data)
                .map_err(|e| CheckpointError::BadTensor(format!("{name}: {e}")))?;
            params.insert(name, t);
        }
    }
    // anything past the declared tensors is corruption
    let mut extra = [0u8; 1];
    if f.read(&mut extra)? != 0 {
        return Err(CheckpointError::BadTensor("trailing bytes".into()));
    }
    let config = ModelConfig::from_fields(&hparams).ok_or(CheckpointError::MissingHyperparams)?;
    Ok(Model { config, params })
}
