//! Binary ranker checkpoints.
//!
//! Layout: magic `XRRK`, format version (u32), header JSON length (u32) and
//! bytes (config and model shape), tensor count (u32), then per tensor: name
//! length (u32), name bytes, rows (u32), cols (u32), row-major little-endian f32.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelShape, RankerConfig, RankerModel, TensorSpec};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"XRRK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: RankerConfig,
    shape: ModelShape,
}

pub fn save_model(model: &RankerModel, path: &Path) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        shape: model.shape.clone(),
    })?;
    let mut buf = Vec::with_capacity(16 + header.len() + 4 * model.params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(model.params.specs.len() as u32).to_le_bytes());
    for spec in &model.params.specs {
        buf.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(spec.name.as_bytes());
        buf.extend_from_slice(&(spec.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(spec.cols as u32).to_le_bytes());
        for &x in &model.params.data[spec.range()] {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn load_model(path: &Path) -> Result<RankerModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Checkpoint {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(bad("not a ranker checkpoint"));
    }
    match r.u32() {
        Some(VERSION) => {}
        Some(v) => return Err(bad(&format!("unsupported version {v}"))),
        None => return Err(bad("truncated header")),
    }
    let header_len = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len).ok_or_else(|| bad("truncated header"))?)
        .map_err(|e| bad(&format!("bad header: {e}")))?;
    let n_tensors = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let mut specs = Vec::with_capacity(n_tensors);
    let mut data = Vec::new();
    for _ in 0..n_tensors {
        let truncated = || bad("truncated tensor");
        let name_len = r.u32().ok_or_else(truncated)? as usize;
        let name = std::str::from_utf8(r.take(name_len).ok_or_else(truncated)?)
            .map_err(|_| bad("tensor name is not UTF-8"))?
            .to_string();
        let rows = r.u32().ok_or_else(truncated)? as usize;
        let cols = r.u32().ok_or_else(truncated)? as usize;
        let n = rows.checked_mul(cols).ok_or_else(truncated)?;
        let raw = r.take(n.checked_mul(4).ok_or_else(truncated)?).ok_or_else(truncated)?;
        specs.push(TensorSpec {
            name,
            offset: data.len(),
            rows,
            cols,
        });
        data.extend(raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))));
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    RankerModel::from_parts(&header.config, &header.shape, &specs, data).map_err(|e| bad(&e.to_string()))
}
