//! Periodic 2-D convolution (deblurring forward model).

use crate::error::{Error, Result};
use crate::ops::operator::LinearOperator;
use ndarray::Array2;

/// `out[r, c] = sum_ij k[i, j] x[r + i - cr, c + j - cc]` with wrap-around,
/// where `(cr, cc)` is the kernel centre.
#[derive(Clone, Debug)]
pub struct CircularBlur {
    rows: usize,
    cols: usize,
    kernel: Array2<f64>,
}

impl CircularBlur {
    pub fn new(rows: usize, cols: usize, kernel: Array2<f64>) -> Result<Self> {
        let (kr, kc) = kernel.dim();
        if kr == 0 || kc == 0 || kr > rows || kc > cols {
            return Err(Error::shape(format!("{kr}x{kc} kernel does not fit a {rows}x{cols} image")));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::value("blur kernel has non-finite entries"));
        }
        Ok(CircularBlur { rows, cols, kernel })
    }

    /// Normalised `size x size` box kernel.
    pub fn uniform(rows: usize, cols: usize, size: usize) -> Result<Self> {
        let w = 1.0 / (size * size) as f64;
        Self::new(rows, cols, Array2::from_elem((size, size), w))
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    fn taps(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (kr, kc) = self.kernel.dim();
        let (cr, cc) = ((kr / 2) as isize, (kc / 2) as isize);
        self.kernel
            .indexed_iter()
            .map(move |((i, j), &w)| (i as isize - cr, j as isize - cc, w))
    }

    fn wrap(&self, r: isize, c: isize) -> usize {
        let r = r.rem_euclid(self.rows as isize) as usize;
        let c = c.rem_euclid(self.cols as isize) as usize;
        r * self.cols + c
    }
}

impl LinearOperator for CircularBlur {
    fn in_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (di, dj, w) in self.taps() {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    out[r * self.cols + c] += w * x[self.wrap(r as isize + di, c as isize + dj)];
                }
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (di, dj, w) in self.taps() {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    out[r * self.cols + c] += w * y[self.wrap(r as isize - di, c as isize - dj)];
                }
            }
        }
    }
}
