//! Versioned binary model container.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` scalar width in bytes,
//! `u64` header length, a JSON header (config and tensor tables), then the
//! parameters followed by the buffers as little-endian floats.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::model::{Model, ModelConfig, TensorSpec};

pub const MAGIC: &[u8; 8] = b"TORICEND";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    param_count: usize,
    buffer_count: usize,
    params: Vec<TensorSpec>,
    buffers: Vec<TensorSpec>,
}

pub fn write_model<S: Scalar, W: Write>(model: &Model<S>, mut out: W) -> Result<()> {
    let header = Header {
        config: model.config().clone(),
        param_count: model.param_count(),
        buffer_count: model.buffers().len(),
        params: model.param_specs().to_vec(),
        buffers: model.buffer_specs().to_vec(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(24 + json.len() + (header.param_count + header.buffer_count) * S::BYTES);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(S::BYTES as u32).to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for &v in model.params().iter().chain(model.buffers()) {
        v.write_le(&mut bytes);
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint("file truncated".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

/// Reads a model stored at either float width, converting to `S`.
pub fn read_model<S: Scalar, R: Read>(mut input: R) -> Result<Model<S>> {
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    let mut bytes = raw.as_slice();
    if take(&mut bytes, 8)? != MAGIC {
        return Err(Error::Checkpoint("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let width = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes")) as usize;
    let header_len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes")) as usize;
    let header: Header = serde_json::from_slice(take(&mut bytes, header_len)?)?;
    let total = header.param_count + header.buffer_count;
    let payload = take(&mut bytes, total * width)?;
    if !bytes.is_empty() {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    let values: Vec<S> = match width {
        4 => payload.chunks_exact(4).map(|c| S::of(f32::read_le(c) as f64)).collect(),
        8 => payload.chunks_exact(8).map(|c| S::of(f64::read_le(c))).collect(),
        w => return Err(Error::Checkpoint(format!("unsupported scalar width {w}"))),
    };
    let buffers = values[header.param_count..].to_vec();
    let mut params = values;
    params.truncate(header.param_count);
    let model = Model::from_parts(header.config, params, buffers)?;
    if model.param_specs() != header.params.as_slice() || model.buffer_specs() != header.buffers.as_slice() {
        return Err(Error::Checkpoint("tensor table does not match the configured architecture".into()));
    }
    Ok(model)
}

pub fn save<S: Scalar>(model: &Model<S>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(file))
}

pub fn load<S: Scalar>(path: impl AsRef<Path>) -> Result<Model<S>> {
    read_model(std::fs::File::open(path)?)
}
