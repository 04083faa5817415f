//! Binary checkpoint container.
//!
//! All integers and floats are little-endian; every parameter is stored as an
//! `f64`, so `f64` models round-trip bit-exactly.
//!
//! ```text
//! magic        4 bytes   "TFLW"
//! version      u32       FORMAT_VERSION
//! d            u64
//! s_max        f64       log-scale clamp (must equal block::S_MAX)
//! transform    u8 tag    0 = identity, 1 = standardize, 2 = logit
//!   tag 1:     tensor shift, tensor scale
//!   tag 2:     f64 alpha, f64 range
//! layer count  u64
//! per layer:   u32 tensor count (9), then tensors in order
//!              mask (0/1), loc, log_scale, w1, b1, w2, b2, w3, b3
//! tensor:      u32 rank, rank x u64 dims, prod(dims) x f64 (row-major)
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::block::{ActNorm, CouplingBlock, S_MAX};
use super::mlp::Mlp;
use super::model::FlowModel;
use super::tensor::Tensor;
use super::transform::DataTransform;
use crate::{Error, Result, Scalar};

pub const MAGIC: &[u8; 4] = b"TFLW";
pub const FORMAT_VERSION: u32 = 1;
const TENSORS_PER_LAYER: u32 = 9;

fn put_tensor<T: Scalar>(buf: &mut Vec<u8>, shape: &[usize], data: &[T]) {
    buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &s in shape {
        buf.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
}

pub fn encode<T: Scalar>(model: &FlowModel<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&S_MAX.to_le_bytes());
    match model.transform() {
        DataTransform::Identity => buf.push(0),
        DataTransform::Standardize { shift, scale } => {
            buf.push(1);
            put_tensor(&mut buf, &[shift.len()], shift);
            put_tensor(&mut buf, &[scale.len()], scale);
        }
        DataTransform::Logit { alpha, range } => {
            buf.push(2);
            buf.extend_from_slice(&alpha.to_f64_lossy().to_le_bytes());
            buf.extend_from_slice(&range.to_f64_lossy().to_le_bytes());
        }
    }
    buf.extend_from_slice(&(model.blocks().len() as u64).to_le_bytes());
    for blk in model.blocks() {
        buf.extend_from_slice(&TENSORS_PER_LAYER.to_le_bytes());
        let mask: Vec<T> = blk
            .mask()
            .iter()
            .map(|&m| if m { T::one() } else { T::zero() })
            .collect();
        put_tensor(&mut buf, &[mask.len()], &mask);
        for t in blk.tensors() {
            put_tensor(&mut buf, t.shape(), t.data());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
    name: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            source_name: self.name.to_string(),
            offset: self.offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.offset < n {
            return Err(self.err(format!("truncated: need {n} more bytes")));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor<T: Scalar>(&mut self, expected: &[usize]) -> Result<Tensor<T>> {
        let start = self.offset;
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(self.err(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        if shape != expected {
            self.offset = start;
            return Err(self.err(format!("tensor shape {shape:?}, expected {expected:?}")));
        }
        let n: usize = shape.iter().product();
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| self.err("tensor too large"))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Tensor::from_vec(&shape, data)
    }

    /// Read a tensor whose shape is only known to have `rank` dims.
    fn tensor_any<T: Scalar>(&mut self, rank: usize) -> Result<Tensor<T>> {
        let save = self.offset;
        let r = self.u32()? as usize;
        if r != rank {
            self.offset = save;
            return Err(self.err(format!("tensor rank {r}, expected {rank}")));
        }
        let mut shape = Vec::with_capacity(r);
        for _ in 0..r {
            shape.push(self.u64()? as usize);
        }
        self.offset = save;
        self.tensor(&shape)
    }
}

pub fn decode<T: Scalar>(bytes: &[u8], name: &str) -> Result<FlowModel<T>> {
    let mut r = Reader {
        bytes,
        offset: 0,
        name,
    };
    if r.take(4)? != MAGIC {
        r.offset = 0;
        return Err(r.err("bad magic, expected \"TFLW\""));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(r.err(format!("unsupported format version {version}")));
    }
    let d = r.u64()? as usize;
    if d == 0 {
        return Err(r.err("dimension must be positive"));
    }
    let smax = r.f64()?;
    if smax != S_MAX {
        return Err(r.err(format!(
            "log-scale clamp {smax} differs from supported {S_MAX}"
        )));
    }
    let transform = match r.u8()? {
        0 => DataTransform::Identity,
        1 => {
            let shift = r.tensor::<T>(&[d])?.data().to_vec();
            let scale = r.tensor::<T>(&[d])?.data().to_vec();
            DataTransform::Standardize { shift, scale }
        }
        2 => {
            let alpha = T::of(r.f64()?);
            let range = T::of(r.f64()?);
            DataTransform::Logit { alpha, range }
        }
        tag => {
            r.offset -= 1;
            return Err(r.err(format!("unknown transform tag {tag}")));
        }
    };
    let n_layers = r.u64()? as usize;
    let mut blocks = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let count = r.u32()?;
        if count != TENSORS_PER_LAYER {
            return Err(r.err(format!(
                "layer has {count} tensors, expected {TENSORS_PER_LAYER}"
            )));
        }
        let mask_t = r.tensor::<T>(&[d])?;
        let mut mask = Vec::with_capacity(d);
        for &v in mask_t.data() {
            if v == T::one() {
                mask.push(true);
            } else if v == T::zero() {
                mask.push(false);
            } else {
                return Err(r.err("mask entries must be 0 or 1"));
            }
        }
        let loc = r.tensor(&[d])?;
        let log_scale = r.tensor(&[d])?;
        let w1 = r.tensor_any::<T>(2)?;
        let hidden = w1.shape()[0];
        let b1 = r.tensor(&[hidden])?;
        let w2 = r.tensor(&[hidden, hidden])?;
        let b2 = r.tensor(&[hidden])?;
        let w3 = r.tensor_any::<T>(2)?;
        let n_out = w3.shape()[0];
        if w3.shape()[1] != hidden {
            return Err(r.err("output layer width disagrees with hidden width"));
        }
        let b3 = r.tensor(&[n_out])?;
        let net = Mlp {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        };
        let blk = CouplingBlock::from_parts(mask, ActNorm { loc, log_scale }, net)
            .map_err(|e| r.err(e.to_string()))?;
        blocks.push(blk);
    }
    if r.offset != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.offset)));
    }
    FlowModel::from_parts(d, transform, blocks).map_err(|e| r.err(e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save<T: Scalar>(model: &FlowModel<T>, path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = encode(model);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Load a checkpoint; also returns the SHA-256 of the file contents.
pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(FlowModel<T>, String)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let model = decode(&bytes, &path.display().to_string())?;
    Ok((model, sha256_hex(&bytes)))
}
