//! Union of learned transforms with patch clustering (ULTRA).

use super::transform::{gather_columns, hard_threshold_matrix, procrustes_update, Transform};
use crate::error::{Error, Result};
use crate::ops::bases::random_orthogonal;
use crate::ops::rng::seeded;
use crate::ops::threshold::{hard, l0_coding_cost};
use crate::parallel;
use ndarray::{Array2, ArrayView2};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct UnionTransformModel {
    pub transforms: Vec<Transform>,
    pub gamma: f64,
}

impl UnionTransformModel {
    pub fn new(transforms: Vec<Transform>, gamma: f64) -> Result<Self> {
        let Some(first) = transforms.first() else {
            return Err(Error::config("a union model needs at least one transform"));
        };
        let n = first.dim();
        if transforms.iter().any(|t| t.dim() != n || !t.unitary) {
            return Err(Error::config("all transforms must be unitary with equal size"));
        }
        if !(gamma >= 0.0) {
            return Err(Error::config("gamma must be nonnegative"));
        }
        Ok(UnionTransformModel { transforms, gamma })
    }

    pub fn k(&self) -> usize {
        self.transforms.len()
    }

    pub fn dim(&self) -> usize {
        self.transforms[0].dim()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == k).collect()
    }

    pub fn is_partition(&self, k: usize, s: usize) -> bool {
        self.labels.len() == s && self.labels.iter().all(|&l| l < k)
    }
}

/// Best transform per patch under the exact clustering cost
/// `sum_j min((Omega_k x)_j^2, gamma^2)`; ties go to the smallest `k`.
/// Returns the labels and the matching hard-thresholded codes.
pub fn assign_clusters(model: &UnionTransformModel, x: ArrayView2<f64>) -> Result<(ClusterAssignment, Array2<f64>)> {
    let (n, s) = x.dim();
    if n != model.dim() {
        return Err(Error::shape(format!("patches have length {n}, model expects {}", model.dim())));
    }
    let gamma = model.gamma;
    let coeffs: Vec<Array2<f64>> = model.transforms.iter().map(|t| t.apply(x)).collect();
    let labels = parallel::map_indexed(s, |i| {
        let mut best = (f64::INFINITY, 0);
        for (k, c) in coeffs.iter().enumerate() {
            let col: Vec<f64> = c.column(i).to_vec();
            let cost = l0_coding_cost(&col, gamma);
            if cost < best.0 {
                best = (cost, k);
            }
        }
        best.1
    });
    let codes = Array2::from_shape_fn((n, s), |(j, i)| hard(coeffs[labels[i]][[j, i]], gamma));
    Ok((ClusterAssignment { labels }, codes))
}

/// `sum_i ||Omega_{k_i} x_i - z_i||^2 + gamma^2 ||z_i||_0`.
pub fn union_objective(
    model: &UnionTransformModel,
    x: ArrayView2<f64>,
    labels: &ClusterAssignment,
    codes: &Array2<f64>,
) -> f64 {
    let g2 = model.gamma * model.gamma;
    let mut total = 0.0;
    for (k, t) in model.transforms.iter().enumerate() {
        let idx = labels.members(k);
        if idx.is_empty() {
            continue;
        }
        let r = t.apply(gather_columns(x, &idx).view()) - gather_columns(codes.view(), &idx);
        total += r.iter().map(|v| v * v).sum::<f64>();
        total += g2 * gather_columns(codes.view(), &idx).iter().filter(|&&v| v != 0.0).count() as f64;
    }
    total
}

#[derive(Clone, Debug)]
pub struct UltraFit {
    pub model: UnionTransformModel,
    pub assignment: ClusterAssignment,
    pub codes: Array2<f64>,
    pub objective: Vec<f64>,
}

/// Alternates per-cluster Procrustes updates with joint clustering and
/// sparse coding. Initial labels are seeded uniform; transforms start at
/// the DCT plus `K - 1` seeded random orthogonal matrices. Clusters that
/// become empty keep their transform.
pub fn learn_ultra(x: ArrayView2<f64>, k: usize, gamma: f64, iters: usize, seed: u64) -> Result<UltraFit> {
    let (n, s) = x.dim();
    if k == 0 {
        return Err(Error::config("K must be at least 1"));
    }
    if k > s {
        return Err(Error::config(format!("K={k} exceeds the number of patches {s}")));
    }
    let mut rng = seeded(seed);
    let mut transforms = vec![Transform::dct(n)];
    for _ in 1..k {
        transforms.push(Transform {
            omega: random_orthogonal(n, &mut rng),
            unitary: true,
        });
    }
    let mut model = UnionTransformModel::new(transforms, gamma)?;
    let labels: Vec<usize> = if k == 1 { vec![0; s] } else { (0..s).map(|_| rng.random_range(0..k)).collect() };
    let mut assignment = ClusterAssignment { labels };
    let mut codes = Array2::zeros((n, s));
    for kk in 0..k {
        let idx = assignment.members(kk);
        if idx.is_empty() {
            continue;
        }
        let c = hard_threshold_matrix(&model.transforms[kk].apply(gather_columns(x, &idx).view()), gamma);
        for (col, &i) in idx.iter().enumerate() {
            codes.column_mut(i).assign(&c.column(col));
        }
    }
    let mut objective = vec![union_objective(&model, x, &assignment, &codes)];
    for _ in 0..iters {
        let updated: Vec<Result<Transform>> = parallel::map_indexed(k, |kk| {
            let idx = assignment.members(kk);
            if idx.is_empty() {
                return Ok(model.transforms[kk].clone());
            }
            procrustes_update(
                gather_columns(x, &idx).view(),
                gather_columns(codes.view(), &idx).view(),
                &model.transforms[kk],
            )
        });
        model.transforms = updated.into_iter().collect::<Result<_>>()?;
        let (a, c) = assign_clusters(&model, x)?;
        assignment = a;
        codes = c;
        objective.push(union_objective(&model, x, &assignment, &codes));
    }
    Ok(UltraFit { model, assignment, codes, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::transform::learn_transform;
    use crate::ops::bases::{dct_matrix, max_orthonormality_defect};
    use crate::ops::rng::normal_vec;

    fn data(n: usize, s: usize, seed: u64) -> Array2<f64> {
        Array2::from_shape_vec((n, s), normal_vec(&mut seeded(seed), n * s)).unwrap()
    }

    #[test]
    fn single_cluster_labels_are_zero() {
        let m = UnionTransformModel::new(vec![Transform::dct(4)], 0.3).unwrap();
        let (a, _) = assign_clusters(&m, data(4, 10, 1).view()).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn basis_vector_prefers_identity() {
        let eye = Transform { omega: Array2::eye(4), unitary: true };
        let dct = Transform { omega: dct_matrix(4), unitary: true };
        let m = UnionTransformModel::new(vec![eye, dct], 0.5).unwrap();
        let mut x = Array2::zeros((4, 1));
        x[[0, 0]] = 1.0;
        let (a, codes) = assign_clusters(&m, x.view()).unwrap();
        assert_eq!(a.labels, vec![0]);
        assert_eq!(codes.column(0).to_vec(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn one_cluster_matches_single_transform_bitwise() {
        let x = data(9, 60, 2);
        let u = learn_ultra(x.view(), 1, 0.7, 6, 11).unwrap();
        let t = learn_transform(x.view(), 0.7, 6, 11).unwrap();
        assert_eq!(u.model.transforms[0], t.transform);
        assert_eq!(u.codes, t.codes);
        assert_eq!(u.objective, t.objective);
    }

    #[test]
    fn zero_iterations_return_initialisation() {
        let x = data(4, 40, 3);
        let fit = learn_ultra(x.view(), 3, 0.5, 0, 9).unwrap();
        assert_eq!(fit.model.transforms[0], Transform::dct(4));
        assert_eq!(fit.objective.len(), 1);
        let again = learn_ultra(x.view(), 3, 0.5, 0, 9).unwrap();
        assert_eq!(fit.assignment, again.assignment);
    }

    #[test]
    fn objective_is_monotone() {
        let x = data(16, 300, 4);
        let fit = learn_ultra(x.view(), 3, 0.9, 12, 5).unwrap();
        for w in fit.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        assert!(fit.assignment.is_partition(3, 300));
        for t in &fit.model.transforms {
            assert!(max_orthonormality_defect(&t.omega) <= 1e-8);
        }
    }

    #[test]
    fn too_many_clusters_is_rejected() {
        assert!(matches!(learn_ultra(data(4, 3, 1).view(), 4, 0.1, 1, 0), Err(Error::Config(_))));
    }
}
