//! `STM1` binary model files.
//!
//! Layout (little-endian): `b"STM1"`, kind byte, `u32` dim count, the `u32`
//! dims, `u64` payload length, the `f64` payload, then the CRC32 of every
//! preceding byte.

use crate::error::{Error, Result};
use crate::learning::{Dictionary, MultiLayerModel, Transform, UnionTransformModel};
use ndarray::Array2;
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 4] = b"STM1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Dictionary = 1,
    Transform = 2,
    Ultra = 3,
    MultiLayer = 4,
    Super = 5,
}

impl ModelKind {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => ModelKind::Dictionary,
            2 => ModelKind::Transform,
            3 => ModelKind::Ultra,
            4 => ModelKind::MultiLayer,
            5 => ModelKind::Super,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawModel {
    pub kind: ModelKind,
    pub dims: Vec<u32>,
    pub payload: Vec<f64>,
}

pub fn encode_model(raw: &RawModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 4 * raw.dims.len() + 8 * raw.payload.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.push(raw.kind as u8);
    out.extend_from_slice(&(raw.dims.len() as u32).to_le_bytes());
    for d in &raw.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&(raw.payload.len() as u64).to_le_bytes());
    for v in &raw.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() < self.at + n {
            return Err(Error::format(
                self.at as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.at),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<RawModel> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::format(0, "bad magic, expected STM1"));
    }
    let kind_byte = c.take(1, "kind")?[0];
    let kind = ModelKind::from_byte(kind_byte).ok_or_else(|| Error::format(4, format!("unknown model kind {kind_byte}")))?;
    let ndims = c.u32("dim count")? as usize;
    if ndims > 1 << 16 {
        return Err(Error::format(5, format!("implausible dim count {ndims}")));
    }
    let dims = (0..ndims).map(|_| c.u32("dims")).collect::<Result<Vec<_>>>()?;
    let len_at = c.at;
    let len = u64::from_le_bytes(c.take(8, "payload length")?.try_into().unwrap());
    let remaining = (bytes.len() - c.at) as u64;
    if len.checked_mul(8).and_then(|b| b.checked_add(4)) != Some(remaining) {
        return Err(Error::format(
            len_at as u64,
            format!("payload of {len} values needs {} bytes, found {remaining}", len.saturating_mul(8).saturating_add(4)),
        ));
    }
    let payload: Vec<f64> = c
        .take(8 * len as usize, "payload")?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let crc_at = c.at;
    let stored = c.u32("checksum")?;
    let crc = crc32fast::hash(&bytes[..crc_at]);
    if stored != crc {
        return Err(Error::format(crc_at as u64, format!("CRC mismatch: stored {stored:08x}, computed {crc:08x}")));
    }
    if payload.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(len_at as u64 + 8, "non-finite payload value"));
    }
    Ok(RawModel { kind, dims, payload })
}

/// A model type with an `STM1` representation.
pub trait ModelCodec: Sized {
    const KIND: ModelKind;
    fn to_raw(&self) -> RawModel;
    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        encode_model(&self.to_raw())
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let raw = decode_model(bytes)?;
        if raw.kind != Self::KIND {
            return Err(Error::format(4, format!("expected a {:?} model, found {:?}", Self::KIND, raw.kind)));
        }
        Self::from_parts(&raw.dims, &raw.payload)
    }

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn layout(dims: &[u32], want: usize, payload: &[f64], len: usize) -> Result<()> {
    if dims.len() != want || payload.len() != len {
        return Err(Error::format(5, format!("model layout mismatch: dims {dims:?}, {} values", payload.len())));
    }
    Ok(())
}

pub(crate) fn square(payload: &[f64], n: usize) -> Array2<f64> {
    Array2::from_shape_vec((n, n), payload.to_vec()).expect("length checked")
}

impl ModelCodec for Dictionary {
    const KIND: ModelKind = ModelKind::Dictionary;
    fn to_raw(&self) -> RawModel {
        RawModel {
            kind: Self::KIND,
            dims: vec![self.atoms.nrows() as u32, self.atoms.ncols() as u32],
            payload: self.atoms.iter().copied().collect(),
        }
    }
    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self> {
        let (m, j) = (*dims.first().unwrap_or(&0) as usize, *dims.get(1).unwrap_or(&0) as usize);
        layout(dims, 2, payload, m * j)?;
        Dictionary::new(Array2::from_shape_vec((m, j), payload.to_vec()).expect("length checked"))
    }
}

impl ModelCodec for Transform {
    const KIND: ModelKind = ModelKind::Transform;
    fn to_raw(&self) -> RawModel {
        RawModel {
            kind: Self::KIND,
            dims: vec![self.dim() as u32, self.unitary as u32],
            payload: self.omega.iter().copied().collect(),
        }
    }
    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self> {
        let n = *dims.first().unwrap_or(&0) as usize;
        layout(dims, 2, payload, n * n)?;
        let omega = square(payload, n);
        if dims[1] == 1 {
            Transform::unitary(omega)
        } else {
            Ok(Transform { omega, unitary: false })
        }
    }
}

impl ModelCodec for UnionTransformModel {
    const KIND: ModelKind = ModelKind::Ultra;
    fn to_raw(&self) -> RawModel {
        let mut payload = vec![self.gamma];
        for t in &self.transforms {
            payload.extend(t.omega.iter().copied());
        }
        RawModel {
            kind: Self::KIND,
            dims: vec![self.dim() as u32, self.k() as u32],
            payload,
        }
    }
    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self> {
        let (n, k) = (*dims.first().unwrap_or(&0) as usize, *dims.get(1).unwrap_or(&0) as usize);
        layout(dims, 2, payload, 1 + k * n * n)?;
        let transforms = (0..k)
            .map(|i| Transform::unitary(square(&payload[1 + i * n * n..1 + (i + 1) * n * n], n)))
            .collect::<Result<Vec<_>>>()?;
        UnionTransformModel::new(transforms, payload[0])
    }
}

impl ModelCodec for MultiLayerModel {
    const KIND: ModelKind = ModelKind::MultiLayer;
    fn to_raw(&self) -> RawModel {
        let mut payload = self.gammas.clone();
        for t in &self.layers {
            payload.extend(t.omega.iter().copied());
        }
        RawModel {
            kind: Self::KIND,
            dims: vec![self.layers[0].dim() as u32, self.depth() as u32],
            payload,
        }
    }
    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self> {
        let (n, l) = (*dims.first().unwrap_or(&0) as usize, *dims.get(1).unwrap_or(&0) as usize);
        layout(dims, 2, payload, l + l * n * n)?;
        let layers = (0..l)
            .map(|i| Transform::unitary(square(&payload[l + i * n * n..l + (i + 1) * n * n], n)))
            .collect::<Result<Vec<_>>>()?;
        MultiLayerModel::new(layers, payload[..l].to_vec())
    }
}
