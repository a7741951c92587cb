//! Binary checkpoint: an 8-byte magic, a little-endian `u64` header length,
//! a JSON header describing every tensor, then the raw little-endian `f64`
//! tensor data in header order. Values round-trip bit-exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::sampling::{stream, FanoutConfig};

const MAGIC: &[u8; 8] = b"ACHGNN\x00\x01";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub fanout: FanoutConfig,
    pub aspect_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model: ModelConfig,
    fanout: FanoutConfig,
    feature_dim: usize,
    num_aspects: usize,
    aspect_names: Vec<String>,
    tensors: Vec<TensorHeader>,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<()> {
    let p = &ckpt.params;
    let header = Header {
        version: 1,
        model: p.config(),
        fanout: ckpt.fanout,
        feature_dim: p.input_dim(),
        num_aspects: p.num_aspects(),
        aspect_names: ckpt.aspect_names.clone(),
        tensors: p
            .tensors()
            .into_iter()
            .map(|t| TensorHeader {
                name: t.name,
                shape: [t.shape.0, t.shape.1],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * p.num_parameters());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in p.tensors() {
        for v in t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    if header.version != 1 {
        return Err(bad("unsupported checkpoint version"));
    }

    let mut params = ModelParams::init(
        &header.model,
        header.feature_dim,
        header.num_aspects,
        &mut stream(0, 0),
    )?
    .zeros_like();
    let mut offset = 16 + len;
    let tensors = params.tensors_mut();
    if tensors.len() != header.tensors.len() {
        return Err(bad("tensor count does not match the model configuration"));
    }
    for (t, h) in tensors.into_iter().zip(&header.tensors) {
        if t.name != h.name || t.data.len() != h.shape[0] * h.shape[1] {
            return Err(Error::Checkpoint(format!("unexpected tensor {}", h.name)));
        }
        for v in t.data.iter_mut() {
            let chunk = bytes
                .get(offset..offset + 8)
                .ok_or_else(|| bad("truncated tensor data"))?;
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            offset += 8;
        }
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        params,
        fanout: header.fanout,
        aspect_names: header.aspect_names,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(ckpt, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(f))
}
