//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  "EPEXCKPT"
//! u32    format version
//! u64    metadata length, then that many bytes of JSON {config, vocab, catalog}
//! u64    parameter count
//! per parameter:
//!   u32 name length, name (UTF-8)
//!   u32 rank, rank × u64 dims
//!   product(dims) × f64
//! ```

use std::path::Path;

use epex_core::corpus::{LabelCatalog, Vocab};
use epex_core::model::{JointModel, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::io::write_atomic;
use crate::FormatError;

pub const MAGIC: &[u8; 8] = b"EPEXCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    vocab: Vocab,
    catalog: LabelCatalog,
}

/// A trained model with the vocabulary and label catalog it was trained on.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: JointModel,
    pub vocab: Vocab,
    pub catalog: LabelCatalog,
}

pub fn encode(model: &JointModel, vocab: &Vocab, catalog: &LabelCatalog) -> Result<Vec<u8>, FormatError> {
    let meta = serde_json::to_vec(&Metadata {
        config: model.config.clone(),
        vocab: vocab.clone(),
        catalog: catalog.clone(),
    })?;
    let mut out = Vec::with_capacity(meta.len() + 8 * model.store.scalar_count() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(model.store.len() as u64).to_le_bytes());
    for (_, p) in model.store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let shape = p.tensor.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save(path: &Path, model: &JointModel, vocab: &Vocab, catalog: &LabelCatalog) -> Result<(), FormatError> {
    write_atomic(path, &encode(model, vocab, catalog)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FormatError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, FormatError> {
        usize::try_from(self.u64()?).map_err(|_| FormatError::Checkpoint("length overflows usize".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
    let bad = |m: String| FormatError::Checkpoint(m);
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let meta_len = r.len()?;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)?;
    if meta.config.vocab_size != meta.vocab.len() {
        return Err(bad(format!(
            "config vocab_size {} but vocabulary has {} entries",
            meta.config.vocab_size,
            meta.vocab.len()
        )));
    }
    let mut model = JointModel::new(meta.config, 0).map_err(|e| bad(e.to_string()))?;
    let count = r.len()?;
    if count != model.store.len() {
        return Err(bad(format!("{count} parameters stored, model has {}", model.store.len())));
    }
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| bad("parameter name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad(format!("shape of `{name}` overflows")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| bad(format!("`{name}` too large")))?)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        model
            .store
            .set_values(&name, &shape, &data)
            .map_err(|e| bad(e.to_string()))?;
        if !seen.insert(name.clone()) {
            return Err(bad(format!("parameter `{name}` stored twice")));
        }
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        model,
        vocab: meta.vocab,
        catalog: meta.catalog,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, FormatError> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
