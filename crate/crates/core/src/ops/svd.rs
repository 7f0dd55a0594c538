//! Thin singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! Columns of the taller orientation are orthogonalised pairwise until every
//! pair is orthogonal to working precision. Sweep order is fixed, so results
//! are bit-reproducible. Works for real and complex matrices.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(r: f64) -> Self;
    fn conj(self) -> Self;
    fn abs_sq(self) -> f64;
    fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }
    fn scale(self, r: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(r: f64) -> Self {
        r
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn scale(self, r: f64) -> Self {
        self * r
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(r: f64) -> Self {
        Complex64::new(r, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, r: f64) -> Self {
        self * r
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// `M = U diag(S) V^H` with `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    pub u: Array2<T>,
    pub s: Vec<f64>,
    pub v: Array2<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// `U diag(f(S)) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Array2<T> {
        let (m, k) = self.u.dim();
        let n = self.v.nrows();
        let mut out = Array2::from_elem((m, n), T::zero());
        for l in 0..k {
            let sl = f(self.s[l]);
            if sl == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = self.u[[i, l]].scale(sl);
                for j in 0..n {
                    out[[i, j]] = out[[i, j]] + ui * self.v[[j, l]].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Array2<T> {
        self.reconstruct_with(|s| s)
    }
}

const MAX_SWEEPS: usize = 80;

pub fn svd<T: Scalar>(m: ArrayView2<T>) -> Result<SvdResult<T>> {
    if let Some(bad) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::value(format!("non-finite matrix entry at flat index {bad}")));
    }
    let (rows, cols) = m.dim();
    if rows >= cols {
        jacobi_tall(m.to_owned())
    } else {
        let mh = m.t().mapv(|v| v.conj());
        let r = jacobi_tall(mh)?;
        Ok(SvdResult {
            u: r.v,
            s: r.s,
            v: r.u,
        })
    }
}

fn col_dot<T: Scalar>(a: &Array2<T>, p: usize, q: usize) -> (f64, f64, T) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = T::zero();
    for row in a.rows() {
        let (x, y) = (row[p], row[q]);
        alpha += x.abs_sq();
        beta += y.abs_sq();
        gamma = gamma + x.conj() * y;
    }
    (alpha, beta, gamma)
}

fn rotate<T: Scalar>(a: &mut Array2<T>, p: usize, q: usize, phase: T, c: f64, s: f64) {
    for mut row in a.rows_mut() {
        let x = row[p];
        let y = row[q] * phase;
        row[p] = x.scale(c) - y.scale(s);
        row[q] = x.scale(s) + y.scale(c);
    }
}

fn jacobi_tall<T: Scalar>(mut w: Array2<T>) -> Result<SvdResult<T>> {
    let (m, n) = w.dim();
    let mut v = Array2::from_elem((n, n), T::zero());
    for i in 0..n {
        v[[i, i]] = T::one();
    }
    let tol = f64::EPSILON;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = col_dot(&w, p, q);
                let g = gamma.abs();
                if g < f64::MIN_POSITIVE || g <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate the phase out of the off-diagonal Gram entry first.
                let phase = gamma.conj().scale(1.0 / g);
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| w.column(j).iter().map(|x| x.abs_sq()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal singular values in column order.
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    // Columns at round-off level carry no direction; they are rebuilt below.
    let cutoff = (norms.iter().fold(0.0f64, |a, &b| a.max(b)) * f64::EPSILON * m.max(n) as f64).max(f64::MIN_POSITIVE);
    let mut u = Array2::from_elem((m, n), T::zero());
    let mut vs = Array2::from_elem((n, n), T::zero());
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        for i in 0..n {
            vs[[i, k]] = v[[i, j]];
        }
        if norms[j] > cutoff {
            let inv = 1.0 / norms[j];
            for i in 0..m {
                u[[i, k]] = w[[i, j]].scale(inv);
            }
        } else {
            missing.push(k);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(SvdResult { u, s, v: vs })
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all others.
fn complete_orthonormal<T: Scalar>(u: &mut Array2<T>, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let (m, k) = u.dim();
    let mut filled: Vec<bool> = vec![true; k];
    for &c in missing {
        filled[c] = false;
    }
    let mut candidate = 0;
    for &c in missing {
        while candidate < m {
            let mut vec = vec![T::zero(); m];
            vec[candidate] = T::one();
            candidate += 1;
            // Two passes of Gram-Schmidt for stability.
            for _ in 0..2 {
                for j in 0..k {
                    if !filled[j] {
                        continue;
                    }
                    let mut proj = T::zero();
                    for i in 0..m {
                        proj = proj + u[[i, j]].conj() * vec[i];
                    }
                    for i in 0..m {
                        vec[i] = vec[i] - u[[i, j]] * proj;
                    }
                }
            }
            let nv: f64 = vec.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt();
            if nv > 1e-8 {
                for i in 0..m {
                    u[[i, c]] = vec[i].scale(1.0 / nv);
                }
                filled[c] = true;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::rng::{normal_vec, seeded};
    use ndarray::array;

    #[test]
    fn underflowing_columns_stay_finite() {
        let m = array![[1e-160, 1e-160], [0.0, 1e-170]];
        let r = svd(m.view()).unwrap();
        assert!(r.u.iter().chain(r.v.iter()).chain(r.s.iter()).all(|v| v.is_finite()));
    }

    fn max_orth_defect<T: Scalar>(q: &Array2<T>) -> f64 {
        let k = q.ncols();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let mut d = T::zero();
                for i in 0..q.nrows() {
                    d = d + q[[i, a]].conj() * q[[i, b]];
                }
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    fn frob<T: Scalar>(a: &Array2<T>) -> f64 {
        a.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt()
    }

    #[test]
    fn diagonal() {
        let r = svd(array![[3.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_eq!(r.s, vec![3.0, 1.0]);
    }

    #[test]
    fn zero_matrix() {
        let z = Array2::<f64>::zeros((3, 2));
        let r = svd(z.view()).unwrap();
        assert!(r.s.iter().all(|&s| s == 0.0));
        assert!(max_orth_defect(&r.u) < 1e-12);
    }

    #[test]
    fn rejects_nan() {
        let m = array![[1.0, f64::NAN]];
        assert!(matches!(svd(m.view()), Err(Error::Value(_))));
    }

    /// Cyclic two-sided Jacobi eigenvalues of a symmetric matrix.
    fn sym_eig(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let mut j = Array2::<f64>::eye(n);
                    j[[p, p]] = c;
                    j[[q, q]] = c;
                    j[[p, q]] = s;
                    j[[q, p]] = -s;
                    a = j.t().dot(&a).dot(&j);
                }
            }
        }
        let mut e: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        e.sort_by(|x, y| y.partial_cmp(x).unwrap());
        e
    }

    #[test]
    fn random_5x3_matches_gram_eigenvalues() {
        let mut rng = seeded(11);
        let m = Array2::from_shape_vec((5, 3), normal_vec(&mut rng, 15)).unwrap();
        let r = svd(m.view()).unwrap();
        let eig = sym_eig(m.t().dot(&m));
        for (s, e) in r.s.iter().zip(&eig) {
            assert!((s - e.max(0.0).sqrt()).abs() < 1e-8, "{s} vs {}", e.sqrt());
        }
    }

    #[test]
    fn invariants_real_and_wide() {
        for (seed, (rows, cols)) in [(1, (7, 4)), (2, (4, 9)), (3, (6, 6))] {
            let mut rng = seeded(seed);
            let m = Array2::from_shape_vec((rows, cols), normal_vec(&mut rng, rows * cols)).unwrap();
            let r = svd(m.view()).unwrap();
            assert!(max_orth_defect(&r.u) <= 1e-8);
            assert!(max_orth_defect(&r.v) <= 1e-8);
            assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
            let err = frob(&(r.reconstruct() - &m));
            assert!(err <= 1e-6 * frob(&m));
        }
    }

    #[test]
    fn complex_rank_deficient() {
        let mut rng = seeded(5);
        let a = normal_vec(&mut rng, 12);
        // rank-1 complex outer product, 4x3
        let m = Array2::from_shape_fn((4, 3), |(i, j)| {
            Complex64::new(a[i], a[4 + i]) * Complex64::new(a[8 + j], -a[j])
        });
        let r = svd(m.view()).unwrap();
        assert!(r.s[1] < 1e-12 * r.s[0]);
        assert!(max_orth_defect(&r.u) <= 1e-8);
        assert!(max_orth_defect(&r.v) <= 1e-8);
        assert!(frob(&(r.reconstruct() - &m)) <= 1e-10 * frob(&m));
    }
}
