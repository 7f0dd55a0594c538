//! Patch extraction `P_j` and its adjoint.
//!
//! Patch origins are visited row-major (`(0,0), (0,s), ...`), frame by frame.
//! Each patch is vectorised row-major and stored as one column of a
//! column-major `n x N` matrix, `n = patch_rows * patch_cols`.

use super::image::Image;
use crate::error::{Error, Result};
use ndarray::{Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic extension; every pixel origin on the stride lattice is used.
    #[default]
    Wrap,
    /// Only patches that fit inside the image.
    Truncate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub stride: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl PatchConfig {
    pub fn square(p: usize, stride: usize) -> Self {
        PatchConfig {
            patch_rows: p,
            patch_cols: p,
            stride,
            boundary: Boundary::Wrap,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.stride == 0 || self.patch_rows == 0 || self.patch_cols == 0 {
            return Err(Error::config("patch size and stride must be positive"));
        }
        if self.patch_rows > rows || self.patch_cols > cols {
            return Err(Error::shape(format!(
                "{}x{} patch does not fit a {rows}x{cols} image",
                self.patch_rows, self.patch_cols
            )));
        }
        Ok(())
    }

    fn origins_1d(&self, len: usize, patch: usize) -> Vec<usize> {
        let last = match self.boundary {
            Boundary::Wrap => len - 1,
            Boundary::Truncate => len - patch,
        };
        (0..=last).step_by(self.stride).collect()
    }
}

/// Precomputed pixel indices of every patch for one image shape.
#[derive(Clone, Debug)]
pub struct PatchGrid {
    dims: (usize, usize, usize),
    cfg: PatchConfig,
    count: usize,
    index: Vec<u32>,
}

impl PatchGrid {
    pub fn new(dims: (usize, usize, usize), cfg: PatchConfig) -> Result<Self> {
        let (rows, cols, frames) = dims;
        cfg.validate(rows, cols)?;
        let ro = cfg.origins_1d(rows, cfg.patch_rows);
        let co = cfg.origins_1d(cols, cfg.patch_cols);
        let n = cfg.patch_len();
        let count = ro.len() * co.len() * frames;
        let mut index = Vec::with_capacity(count * n);
        for t in 0..frames {
            let base = t * rows * cols;
            for &r0 in &ro {
                for &c0 in &co {
                    for dr in 0..cfg.patch_rows {
                        let r = (r0 + dr) % rows;
                        for dc in 0..cfg.patch_cols {
                            let c = (c0 + dc) % cols;
                            index.push((base + r * cols + c) as u32);
                        }
                    }
                }
            }
        }
        Ok(PatchGrid {
            dims,
            cfg,
            count,
            index,
        })
    }

    pub fn for_image(x: &Image, cfg: PatchConfig) -> Result<Self> {
        Self::new(x.dims(), cfg)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn config(&self) -> PatchConfig {
        self.cfg
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn patch_len(&self) -> usize {
        self.cfg.patch_len()
    }

    pub fn image_len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    /// Pixel indices of patch `j`.
    pub fn indices(&self, j: usize) -> &[u32] {
        let n = self.patch_len();
        &self.index[j * n..(j + 1) * n]
    }

    pub fn extract(&self, x: &[f64]) -> Array2<f64> {
        let n = self.patch_len();
        let data: Vec<f64> = self.index.iter().map(|&i| x[i as usize]).collect();
        Array2::from_shape_vec((n, self.count).f(), data).expect("patch matrix shape")
    }

    /// `sum_j P_j^T p_j` where `p_j` is column `j` of `patches`.
    pub fn adjoint(&self, patches: &Array2<f64>) -> Result<Vec<f64>> {
        let n = self.patch_len();
        if patches.nrows() != n || patches.ncols() != self.count {
            return Err(Error::shape(format!(
                "expected {}x{} patch matrix, got {}x{}",
                n,
                self.count,
                patches.nrows(),
                patches.ncols()
            )));
        }
        let mut out = vec![0.0; self.image_len()];
        for (j, col) in patches.columns().into_iter().enumerate() {
            for (&i, v) in self.indices(j).iter().zip(col) {
                out[i as usize] += v;
            }
        }
        Ok(out)
    }

    /// Diagonal of `sum_j P_j^T P_j` (how many patches cover each pixel).
    pub fn coverage(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.image_len()];
        for &i in &self.index {
            out[i as usize] += 1.0;
        }
        out
    }

    /// Adjoint followed by division by coverage; uncovered pixels are zero.
    pub fn assemble(&self, patches: &Array2<f64>) -> Result<Vec<f64>> {
        let mut acc = self.adjoint(patches)?;
        for (a, c) in acc.iter_mut().zip(self.coverage()) {
            *a = if c > 0.0 { *a / c } else { 0.0 };
        }
        Ok(acc)
    }
}

/// Columns are vectorised patches in row-major origin order.
pub fn extract_patches(x: &Image, cfg: &PatchConfig) -> Result<Array2<f64>> {
    Ok(PatchGrid::for_image(x, *cfg)?.extract(x.as_slice()))
}

/// Averages overlapping patches back into an image.
pub fn assemble_patches(
    patches: &Array2<f64>,
    dims: (usize, usize, usize),
    cfg: &PatchConfig,
) -> Result<Image> {
    let grid = PatchGrid::new(dims, *cfg)?;
    let data = grid.assemble(patches)?;
    Image::new(dims.0, dims.1, dims.2, data)
}
