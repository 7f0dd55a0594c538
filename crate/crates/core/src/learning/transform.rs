//! Square unitary sparsifying transforms learned by alternating hard
//! thresholding and orthogonal Procrustes updates.

use crate::error::{Error, Result};
use crate::ops::bases::{dct2_matrix, dct_matrix, max_orthonormality_defect};
use crate::ops::svd::svd;
use crate::ops::threshold::hard;
use ndarray::{Array2, ArrayView2, Axis};

#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    pub omega: Array2<f64>,
    pub unitary: bool,
}

impl Transform {
    pub fn unitary(omega: Array2<f64>) -> Result<Self> {
        let (r, c) = omega.dim();
        if r != c || r == 0 {
            return Err(Error::shape(format!("transform must be square, got {r}x{c}")));
        }
        let defect = max_orthonormality_defect(&omega);
        if defect > 1e-8 {
            return Err(Error::value(format!("transform is not unitary (defect {defect:.2e})")));
        }
        Ok(Transform { omega, unitary: true })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// 2-D DCT when `n` is a perfect square (square patches), else 1-D DCT.
    pub fn dct(n: usize) -> Self {
        let p = (n as f64).sqrt().round() as usize;
        let omega = if p * p == n { dct2_matrix(p, p) } else { dct_matrix(n) };
        Transform { omega, unitary: true }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.omega.dot(&x)
    }
}

pub fn hard_threshold_matrix(m: &Array2<f64>, gamma: f64) -> Array2<f64> {
    m.mapv(|v| hard(v, gamma))
}

/// `||Omega X - Z||_F^2 + gamma^2 ||Z||_0`.
pub fn transform_objective(omega: &Array2<f64>, x: ArrayView2<f64>, z: &Array2<f64>, gamma: f64) -> f64 {
    let r = omega.dot(&x) - z;
    let fit: f64 = r.iter().map(|v| v * v).sum();
    let nnz = z.iter().filter(|&&v| v != 0.0).count();
    fit + gamma * gamma * nnz as f64
}

/// Unitary minimiser of `||Omega X - Z||_F` (`Omega = V U^T` from
/// `svd(X Z^T)`). When `X Z^T` vanishes every unitary matrix is optimal and
/// `previous` is kept.
pub fn procrustes_update(x: ArrayView2<f64>, z: ArrayView2<f64>, previous: &Transform) -> Result<Transform> {
    if x.dim() != z.dim() {
        return Err(Error::shape(format!("X is {:?} but Z is {:?}", x.dim(), z.dim())));
    }
    let cross = x.dot(&z.t());
    if cross.iter().all(|&v| v == 0.0) {
        return Ok(previous.clone());
    }
    let dec = svd(cross.view())?;
    let smax = dec.s[0];
    if dec.s.iter().any(|&s| s <= 1e-12 * smax) {
        log::debug!("rank-deficient Procrustes cross product; using the SVD completion");
    }
    Ok(Transform {
        omega: dec.v.dot(&dec.u.t()),
        unitary: true,
    })
}

#[derive(Clone, Debug)]
pub struct TransformFit {
    pub transform: Transform,
    pub codes: Array2<f64>,
    /// Objective at initialisation and after each iteration.
    pub objective: Vec<f64>,
}

/// Alternates `Z <- H_gamma(Omega X)` and the Procrustes update, starting
/// from the DCT. The seed is accepted for interface symmetry with the other
/// learners; the single-transform start is deterministic.
pub fn learn_transform(x: ArrayView2<f64>, gamma: f64, iters: usize, _seed: u64) -> Result<TransformFit> {
    let (n, s) = x.dim();
    if n == 0 || s == 0 {
        return Err(Error::shape("empty training matrix"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::config("gamma must be nonnegative"));
    }
    if s < n {
        log::warn!("only {s} training patches for a {n}-dimensional transform");
    }
    let mut transform = Transform::dct(n);
    let mut codes = hard_threshold_matrix(&transform.apply(x), gamma);
    let mut objective = vec![transform_objective(&transform.omega, x, &codes, gamma)];
    for _ in 0..iters {
        transform = procrustes_update(x, codes.view(), &transform)?;
        codes = hard_threshold_matrix(&transform.apply(x), gamma);
        objective.push(transform_objective(&transform.omega, x, &codes, gamma));
    }
    Ok(TransformFit { transform, codes, objective })
}

/// Columns `idx` of `m`, in order.
pub(crate) fn gather_columns(m: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(1), idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::bases::random_orthogonal;
    use crate::ops::rng::{normal_vec, seeded};
    use ndarray::array;

    fn objective_of(omega: &Array2<f64>, x: &Array2<f64>, z: &Array2<f64>) -> f64 {
        transform_objective(omega, x.view(), z, 0.0)
    }

    #[test]
    fn identity_data_gives_identity() {
        let eye = Array2::<f64>::eye(3);
        let t = procrustes_update(eye.view(), eye.view(), &Transform::dct(3)).unwrap();
        assert!((&t.omega - &eye).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn recovers_planar_rotation_against_angle_grid() {
        let th: f64 = 0.3;
        let rot = array![[th.cos(), -th.sin()], [th.sin(), th.cos()]];
        let eye = Array2::<f64>::eye(2);
        let t = procrustes_update(eye.view(), rot.view(), &Transform::dct(2)).unwrap();
        // oracle: scan rotations and reflections on a 1e-4 angle grid
        let mut best = (f64::INFINITY, Array2::zeros((2, 2)));
        let steps = (2.0 * std::f64::consts::PI / 1e-4) as usize;
        for k in 0..steps {
            let a = k as f64 * 1e-4;
            let (c, s) = (a.cos(), a.sin());
            for cand in [array![[c, -s], [s, c]], array![[c, s], [s, -c]]] {
                let f = objective_of(&cand, &eye, &rot);
                if f < best.0 {
                    best = (f, cand);
                }
            }
        }
        assert!((&best.1 - &rot).iter().all(|v| v.abs() < 1e-4));
        assert!((&t.omega - &rot).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn beats_random_orthogonal_samples() {
        let mut rng = seeded(5);
        let x = Array2::from_shape_vec((3, 20), normal_vec(&mut rng, 60)).unwrap();
        let z = Array2::from_shape_vec((3, 20), normal_vec(&mut rng, 60)).unwrap();
        let t = procrustes_update(x.view(), z.view(), &Transform::dct(3)).unwrap();
        let f = objective_of(&t.omega, &x, &z);
        for _ in 0..200 {
            let q = random_orthogonal(3, &mut rng);
            assert!(f <= objective_of(&q, &x, &z) + 1e-12);
        }
    }

    #[test]
    fn zero_codes_keep_previous_transform() {
        let x = Array2::from_shape_vec((4, 6), normal_vec(&mut seeded(1), 24)).unwrap();
        let prev = Transform::dct(4);
        let t = procrustes_update(x.view(), Array2::zeros((4, 6)).view(), &prev).unwrap();
        assert_eq!(t, prev);
    }

    #[test]
    fn zero_gamma_fits_exactly_at_once() {
        let x = Array2::from_shape_vec((4, 30), normal_vec(&mut seeded(2), 120)).unwrap();
        let fit = learn_transform(x.view(), 0.0, 3, 0).unwrap();
        assert!(fit.objective[1].abs() < 1e-20);
        assert!((&fit.transform.apply(x.view()) - &fit.codes).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn huge_gamma_keeps_initial_transform() {
        let x = Array2::from_shape_vec((4, 30), normal_vec(&mut seeded(3), 120)).unwrap();
        let fit = learn_transform(x.view(), 1e6, 4, 0).unwrap();
        assert!(fit.codes.iter().all(|&v| v == 0.0));
        assert_eq!(fit.transform, Transform::dct(4));
    }

    #[test]
    fn objective_is_monotone_and_transform_unitary() {
        let x = Array2::from_shape_vec((16, 200), normal_vec(&mut seeded(4), 3200)).unwrap();
        let fit = learn_transform(x.view(), 0.8, 15, 0).unwrap();
        for w in fit.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        assert!(max_orthonormality_defect(&fit.transform.omega) <= 1e-8);
    }
}
