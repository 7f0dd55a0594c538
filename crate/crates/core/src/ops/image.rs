use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A real 2-D image, or a stack of `frames` equally sized 2-D frames.
///
/// Data are row-major within a frame and frames are stored back to back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    rows: usize,
    cols: usize,
    frames: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || frames == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {rows}x{cols}x{frames}"
            )));
        }
        if data.len() != rows * cols * frames {
            return Err(Error::shape(format!(
                "image {rows}x{cols}x{frames} needs {} values, got {}",
                rows * cols * frames,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::value(format!("non-finite image value at index {i}")));
        }
        Ok(Image {
            rows,
            cols,
            frames,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, 1, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::zeros_stack(rows, cols, 1)
    }

    pub fn zeros_stack(rows: usize, cols: usize, frames: usize) -> Self {
        assert!(rows > 0 && cols > 0 && frames > 0, "image dimensions must be positive");
        Image {
            rows,
            cols,
            frames,
            data: vec![0.0; rows * cols * frames],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut img = Self::zeros(rows, cols);
        img.data.fill(value);
        img
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                img.data[r * cols + c] = f(r, c);
            }
        }
        img
    }

    /// Builds an image of the same shape as `self` from a raw vector.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.rows, self.cols, self.frames, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.frames)
    }

    pub fn frame_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape(format!(
                "image shapes differ: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
