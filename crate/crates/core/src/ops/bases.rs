//! Fixed orthonormal bases: DCT matrices, one-level Haar, random orthogonal.

use super::operator::LinearOperator;
use super::rng::{normal_vec, SeededRng};
use ndarray::Array2;
use std::f64::consts::PI;

/// Orthonormal DCT-II matrix; row `k` is the `k`-th cosine atom.
pub fn dct_matrix(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(k, i)| {
        let a = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        a * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

/// Separable 2-D DCT acting on row-major vectorised `rows x cols` patches.
pub fn dct2_matrix(rows: usize, cols: usize) -> Array2<f64> {
    let dr = dct_matrix(rows);
    let dc = dct_matrix(cols);
    let n = rows * cols;
    Array2::from_shape_fn((n, n), |(a, b)| {
        let (ka, la) = (a / cols, a % cols);
        let (kb, lb) = (b / cols, b % cols);
        dr[[ka, kb]] * dc[[la, lb]]
    })
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Array2<f64> {
    let g = normal_vec(rng, n * n);
    let mut q = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut v: Vec<f64> = (0..n).map(|i| g[i * n + j]).collect();
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = (0..n).map(|i| q[[i, k]] * v[i]).sum();
                for i in 0..n {
                    v[i] -= proj * q[[i, k]];
                }
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..n {
            q[[i, j]] = v[i] / nv;
        }
    }
    q
}

/// One-level orthonormal 2-D Haar transform on an even-sized image.
///
/// Output layout is four row-major quadrants `[LL | LH; HL | HH]`.
#[derive(Clone, Copy, Debug)]
pub struct Haar2 {
    pub rows: usize,
    pub cols: usize,
}

impl Haar2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows.is_multiple_of(2) && cols.is_multiple_of(2), "Haar needs even dimensions");
        Haar2 { rows, cols }
    }
}

impl LinearOperator for Haar2 {
    fn in_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (hr, hc) = (self.rows / 2, self.cols / 2);
        for i in 0..hr {
            for j in 0..hc {
                let a = x[2 * i * self.cols + 2 * j];
                let b = x[2 * i * self.cols + 2 * j + 1];
                let c = x[(2 * i + 1) * self.cols + 2 * j];
                let d = x[(2 * i + 1) * self.cols + 2 * j + 1];
                out[i * self.cols + j] = 0.5 * (a + b + c + d);
                out[i * self.cols + hc + j] = 0.5 * (a - b + c - d);
                out[(hr + i) * self.cols + j] = 0.5 * (a + b - c - d);
                out[(hr + i) * self.cols + hc + j] = 0.5 * (a - b - c + d);
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (hr, hc) = (self.rows / 2, self.cols / 2);
        for i in 0..hr {
            for j in 0..hc {
                let ll = y[i * self.cols + j];
                let lh = y[i * self.cols + hc + j];
                let hl = y[(hr + i) * self.cols + j];
                let hh = y[(hr + i) * self.cols + hc + j];
                out[2 * i * self.cols + 2 * j] = 0.5 * (ll + lh + hl + hh);
                out[2 * i * self.cols + 2 * j + 1] = 0.5 * (ll - lh + hl - hh);
                out[(2 * i + 1) * self.cols + 2 * j] = 0.5 * (ll + lh - hl - hh);
                out[(2 * i + 1) * self.cols + 2 * j + 1] = 0.5 * (ll - lh - hl + hh);
            }
        }
    }
}

pub fn max_orthonormality_defect(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q);
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[[i, j]] - t).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::dot_test;
    use crate::ops::rng::seeded;

    #[test]
    fn dct_is_orthonormal() {
        assert!(max_orthonormality_defect(&dct_matrix(8)) < 1e-12);
        assert!(max_orthonormality_defect(&dct2_matrix(4, 4)) < 1e-12);
    }

    #[test]
    fn random_orthogonal_is_orthonormal() {
        let q = random_orthogonal(10, &mut seeded(3));
        assert!(max_orthonormality_defect(&q) < 1e-12);
    }

    #[test]
    fn haar_is_orthonormal() {
        let h = Haar2::new(4, 6);
        assert!(dot_test(&h, 5, 1) < 1e-14);
        let x: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        let back = h.adjoint(&h.apply(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
