//! `BFI1` image files and PGM previews.
//!
//! Layout (little-endian): `b"BFI1"`, `u32` rows, cols, frames, the `f32`
//! row-major payload, then the CRC32 of the payload bytes.

use crate::error::{Error, Result};
use crate::ops::image::Image;
use std::path::Path;

pub const IMAGE_MAGIC: &[u8; 4] = b"BFI1";
const HEADER: usize = 16;

pub fn encode_image(x: &Image) -> Result<Vec<u8>> {
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::value(format!("refusing to write non-finite pixel at index {i}")));
    }
    let (rows, cols, frames) = x.dims();
    let mut out = Vec::with_capacity(HEADER + 4 * x.len() + 4);
    out.extend_from_slice(IMAGE_MAGIC);
    for d in [rows, cols, frames] {
        let d = u32::try_from(d).map_err(|_| Error::value("image dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in x.as_slice() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::value(format!("pixel {v} overflows f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[HEADER..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < HEADER {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated header: expected at least {HEADER} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[..4] != IMAGE_MAGIC {
        return Err(Error::format(0, "bad magic, expected BFI1"));
    }
    let dims: Vec<usize> = (0..3).map(|k| read_u32(bytes, 4 + 4 * k) as usize).collect();
    let (rows, cols, frames) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 || frames == 0 {
        return Err(Error::format(4, format!("zero dimension in {rows}x{cols}x{frames}")));
    }
    let n = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(frames))
        .ok_or_else(|| Error::format(4, "dimensions overflow"))?;
    let want = HEADER + 4 * n + 4;
    if bytes.len() != want {
        return Err(Error::format(
            bytes.len().min(want) as u64,
            format!("expected {want} bytes for a {rows}x{cols}x{frames} image, found {}", bytes.len()),
        ));
    }
    let payload = &bytes[HEADER..want - 4];
    let stored = read_u32(bytes, want - 4);
    let crc = crc32fast::hash(payload);
    if crc != stored {
        return Err(Error::format(
            (want - 4) as u64,
            format!("CRC mismatch: stored {stored:08x}, computed {crc:08x}"),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format((HEADER + 4 * i) as u64, "non-finite pixel"));
    }
    Image::new(rows, cols, frames, data)
}

pub fn write_image(path: impl AsRef<Path>, x: &Image) -> Result<()> {
    std::fs::write(path, encode_image(x)?)?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&std::fs::read(path)?)
}

/// 8-bit binary PGM of frame 0, windowed to the frame's min/max.
pub fn encode_pgm(x: &Image) -> Vec<u8> {
    let frame = x.frame(0);
    let lo = frame.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", x.cols(), x.rows()).into_bytes();
    out.extend(frame.iter().map(|v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, x: &Image) -> Result<()> {
    std::fs::write(path, encode_pgm(x))?;
    Ok(())
}
