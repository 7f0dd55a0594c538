//! Undersampled unitary 2-D DFT for Fourier-domain (MRI-style) sampling.

use crate::error::{Error, Result};
use crate::ops::operator::{Composite, Field, LinearOperator, RealToComplex};
use crate::ops::rng::seeded;
use rand::seq::SliceRandom;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Sampled frequencies on a `rows x cols` grid, row-major. DC is `(0, 0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierMask {
    pub rows: usize,
    pub cols: usize,
    pub sampled: Vec<bool>,
}

impl FourierMask {
    pub fn new(rows: usize, cols: usize, sampled: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || sampled.len() != rows * cols {
            return Err(Error::shape(format!(
                "mask of length {} does not fit a {rows}x{cols} grid",
                sampled.len()
            )));
        }
        if !sampled.iter().any(|&s| s) {
            return Err(Error::config("Fourier mask samples nothing"));
        }
        Ok(FourierMask { rows, cols, sampled })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        FourierMask {
            rows,
            cols,
            sampled: vec![true; rows * cols],
        }
    }

    pub fn dc_only(rows: usize, cols: usize) -> Self {
        let mut sampled = vec![false; rows * cols];
        sampled[0] = true;
        FourierMask { rows, cols, sampled }
    }

    /// DC plus a seeded uniform choice of further frequencies, so that
    /// `round(fraction * rows * cols)` (at least 1) entries are sampled.
    pub fn random(rows: usize, cols: usize, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config("sampling fraction must lie in (0, 1]"));
        }
        let n = rows * cols;
        let want = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut rest: Vec<usize> = (1..n).collect();
        rest.shuffle(&mut seeded(seed));
        let mut sampled = vec![false; n];
        sampled[0] = true;
        for &i in rest.iter().take(want - 1) {
            sampled[i] = true;
        }
        FourierMask::new(rows, cols, sampled)
    }

    pub fn count(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.sampled.len() as f64
    }
}

/// `A = S F`: unitary 2-D DFT then selection of the masked entries, in
/// interleaved complex storage on both sides.
#[derive(Clone)]
pub struct MaskedDft {
    mask: FourierMask,
    selected: Vec<usize>,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MaskedDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaskedDft")
            .field("rows", &self.mask.rows)
            .field("cols", &self.mask.cols)
            .field("samples", &self.selected.len())
            .finish()
    }
}

impl MaskedDft {
    pub fn new(mask: FourierMask) -> Self {
        let mut planner = FftPlanner::new();
        let selected = (0..mask.sampled.len()).filter(|&i| mask.sampled[i]).collect();
        MaskedDft {
            row_fwd: planner.plan_fft_forward(mask.cols),
            col_fwd: planner.plan_fft_forward(mask.rows),
            row_inv: planner.plan_fft_inverse(mask.cols),
            col_inv: planner.plan_fft_inverse(mask.rows),
            selected,
            mask,
        }
    }

    pub fn mask(&self) -> &FourierMask {
        &self.mask
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (rows, cols) = (self.mask.rows, self.mask.cols);
        let (rf, cf) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for row in buf.chunks_mut(cols) {
            rf.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                col[r] = buf[r * cols + c];
            }
            cf.process(&mut col);
            for r in 0..rows {
                buf[r * cols + c] = col[r];
            }
        }
        let scale = 1.0 / ((rows * cols) as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn build_masked_dft(mask: FourierMask) -> MaskedDft {
    MaskedDft::new(mask)
}

/// Masked DFT acting on real images (complex measurements).
pub fn build_masked_dft_real(mask: FourierMask) -> Composite<MaskedDft, RealToComplex> {
    let dim = mask.rows * mask.cols;
    Composite::new(MaskedDft::new(mask), RealToComplex { dim }).expect("matching dims")
}

impl LinearOperator for MaskedDft {
    fn in_dim(&self) -> usize {
        2 * self.mask.rows * self.mask.cols
    }
    fn out_dim(&self) -> usize {
        2 * self.selected.len()
    }
    fn field(&self) -> Field {
        Field::Complex
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex64> = x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        self.transform(&mut buf, false);
        for (k, &i) in self.selected.iter().enumerate() {
            out[2 * k] = buf[i].re;
            out[2 * k + 1] = buf[i].im;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.mask.sampled.len()];
        for (k, &i) in self.selected.iter().enumerate() {
            buf[i] = Complex64::new(y[2 * k], y[2 * k + 1]);
        }
        self.transform(&mut buf, true);
        for (i, v) in buf.iter().enumerate() {
            out[2 * i] = v.re;
            out[2 * i + 1] = v.im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::dot_test;
    use crate::ops::rng::normal_vec;
    use crate::ops::vecops::norm_sq;
    use std::f64::consts::PI;

    fn ata(a: &MaskedDft, x: &[f64]) -> Vec<f64> {
        a.adjoint(&a.apply(x).unwrap()).unwrap()
    }

    /// Explicit unitary DFT matrix applied entry by entry.
    fn dense_dft(rows: usize, cols: usize, x: &[Complex64]) -> Vec<Complex64> {
        let n = (rows * cols) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
        for u in 0..rows {
            for v in 0..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    for c in 0..cols {
                        let ph = -2.0 * PI * ((u * r) as f64 / rows as f64 + (v * c) as f64 / cols as f64);
                        acc += x[r * cols + c] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[u * cols + v] = acc / n.sqrt();
            }
        }
        out
    }

    #[test]
    fn full_mask_is_unitary() {
        let a = MaskedDft::new(FourierMask::full(6, 5));
        let x = normal_vec(&mut seeded(3), 60);
        let back = ata(&a, &x);
        for (p, q) in x.iter().zip(&back) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn dc_sample_of_constant_image() {
        let a = build_masked_dft_real(FourierMask::dc_only(4, 6));
        let y = a.apply(&[2.5; 24]).unwrap();
        assert!((y[0] - 2.5 * 24f64.sqrt()).abs() < 1e-12);
        assert!(y[1].abs() < 1e-12);
    }

    #[test]
    fn matches_dense_matrix_and_its_conjugate_transpose() {
        let mask = FourierMask::random(4, 5, 0.5, 9).unwrap();
        let a = MaskedDft::new(mask.clone());
        let x = normal_vec(&mut seeded(1), 40);
        let xc: Vec<Complex64> = x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let full = dense_dft(4, 5, &xc);
        let y = a.apply(&x).unwrap();
        let mut k = 0;
        for (i, f) in full.iter().enumerate() {
            if mask.sampled[i] {
                assert!((y[2 * k] - f.re).abs() < 1e-12 && (y[2 * k + 1] - f.im).abs() < 1e-12);
                k += 1;
            }
        }
        // adjoint against the dense conjugate transpose
        let yv = normal_vec(&mut seeded(2), a.out_dim());
        let got = a.adjoint(&yv).unwrap();
        let n = 20.0f64;
        let sel: Vec<usize> = (0..20).filter(|&i| mask.sampled[i]).collect();
        for r in 0..4 {
            for c in 0..5 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &i) in sel.iter().enumerate() {
                    let (u, v) = (i / 5, i % 5);
                    let ph = 2.0 * PI * ((u * r) as f64 / 4.0 + (v * c) as f64 / 5.0);
                    acc += Complex64::new(yv[2 * k], yv[2 * k + 1]) * Complex64::from_polar(1.0, ph);
                }
                acc /= n.sqrt();
                let p = r * 5 + c;
                assert!((got[2 * p] - acc.re).abs() < 1e-12 && (got[2 * p + 1] - acc.im).abs() < 1e-12);
            }
        }
        assert!(dot_test(&a, 10, 4) <= 1e-6);
    }

    #[test]
    fn normal_operator_is_a_projector() {
        let a = MaskedDft::new(FourierMask::random(8, 8, 0.25, 5).unwrap());
        let x = normal_vec(&mut seeded(6), 128);
        let once = ata(&a, &x);
        let twice = ata(&a, &once);
        for (p, q) in once.iter().zip(&twice) {
            assert!((p - q).abs() < 1e-10);
        }
        assert!(norm_sq(&a.apply(&x).unwrap()) < norm_sq(&x));
    }

    #[test]
    fn random_mask_keeps_dc_and_fraction() {
        let m = FourierMask::random(32, 32, 0.25, 11).unwrap();
        assert!(m.sampled[0]);
        assert_eq!(m.count(), 256);
        assert!(FourierMask::new(2, 2, vec![false; 4]).is_err());
        assert!(FourierMask::random(2, 2, 0.0, 1).is_err());
    }
}
