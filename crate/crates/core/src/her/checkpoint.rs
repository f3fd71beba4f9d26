//! Binary checkpoint: magic, version, a JSON header carrying everything
//! except the weights, then every parameter as raw little-endian f64.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::HerConfig;
use super::model::HerModel;
use crate::error::{Error, Result};
use crate::features::FeatureSuite;
use crate::nn::Matrix;
use crate::text::Vocab;

const MAGIC: &[u8; 8] = b"HERMODEL";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: HerConfig,
    vocab: Vocab,
    embedding_trainable: bool,
    features: Option<FeatureSuite>,
}

/// Serializes the model. Equal models give identical bytes.
pub fn checkpoint_bytes(model: &HerModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        embedding_trainable: model.embeddings.trainable,
        features: model.features.clone(),
    })?;
    let params = model.all_parameters();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let (rows, cols) = p.value.shape();
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        for v in p.value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &HerModel, path: impl AsRef<Path>) -> Result<()> {
    let bytes = checkpoint_bytes(model)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<HerModel> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<HerModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = cur.u64()?;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)?;
    let mut model = HerModel::new(header.config, header.vocab, None, header.features)?;
    model.embeddings.trainable = header.embedding_trainable;

    let count = cur.u32()? as usize;
    let mut params = model.all_parameters_mut();
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} parameters, model expects {}",
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        if name != p.name {
            return Err(Error::Checkpoint(format!("expected parameter {}, found {name}", p.name)));
        }
        let rows = cur.u64()?;
        let cols = cur.u64()?;
        if (rows, cols) != p.value.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter {name} is {rows}x{cols}, expected {}x{}",
                p.value.rows(), p.value.cols()
            )));
        }
        let raw = cur.take(rows * cols * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        p.value = Matrix::from_vec(rows, cols, data)
            .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?;
        p.zero_grad();
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(model)
}
