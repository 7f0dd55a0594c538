//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

/// Exhaustive minimiser of `||v - z||^2 + gamma^2 ||z||_0` over all supports.
/// Ties prefer the larger support, matching the keep-on-equality rule.
pub fn l0_brute_force(v: &[f64], gamma: f64) -> Vec<f64> {
    let n = v.len();
    let mut best = (f64::INFINITY, 0usize, 0u32);
    for mask in 0u32..(1 << n) {
        let mut cost = 0.0;
        for (i, vi) in v.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cost += gamma * gamma;
            } else {
                cost += vi * vi;
            }
        }
        let size = mask.count_ones() as usize;
        if cost < best.0 || (cost == best.0 && size > best.1) {
            best = (cost, size, mask);
        }
    }
    (0..n).map(|i| if best.2 & (1 << i) != 0 { v[i] } else { 0.0 }).collect()
}

/// Minimiser of `(1/2)||M - Z||_F^2 + tau ||Z||_*` through the factored
/// surrogate `(1/2)||M - L R^T||^2 + (tau/2)(||L||^2 + ||R||^2)`, whose
/// minimum over factors equals the nuclear-norm problem. Plain gradient
/// descent from a fixed deterministic start; no SVD is used.
pub fn svt_oracle(m: &Array2<f64>, tau: f64, steps: usize) -> Array2<f64> {
    let (p, q) = m.dim();
    let k = p.min(q);
    let scale = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let mut l = Array2::from_shape_fn((p, k), |(i, j)| 0.3 * ((1 + i * 7 + j * 3) as f64).sin());
    let mut r = Array2::from_shape_fn((q, k), |(i, j)| 0.3 * ((2 + i * 5 + j * 11) as f64).cos());
    let eta = 0.2 / scale;
    for _ in 0..steps {
        let resid = l.dot(&r.t()) - m;
        let gl = resid.dot(&r) + &l * tau;
        let gr = resid.t().dot(&l) + &r * tau;
        l = &l - &(gl * eta);
        r = &r - &(gr * eta);
    }
    l.dot(&r.t())
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap()).unwrap();
        for j in 0..n {
            m.swap([col, j], [piv, j]);
        }
        x.swap(col, piv);
        for i in col + 1..n {
            let f = m[[i, col]] / m[[col, col]];
            for j in col..n {
                m[[i, j]] -= f * m[[col, j]];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[[i, j]] * x[j]).sum();
        x[i] = (x[i] - s) / m[[i, i]];
    }
    x
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    let den: f64 = b.iter().map(|q| q * q).sum();
    (num / den.max(1e-300)).sqrt()
}

/// `s` columns with `k` nonzeros of magnitude in [1, 2] and random sign.
pub fn sparse_codes(n: usize, s: usize, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut z = Array2::zeros((n, s));
    for i in 0..s {
        let mut placed = 0;
        while placed < k {
            let r = rng.random_range(0..n);
            if z[[r, i]] == 0.0 {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                z[[r, i]] = sign * rng.random_range(1.0..2.0);
                placed += 1;
            }
        }
    }
    z
}

/// Best label agreement over both orderings of two clusters.
pub fn two_cluster_accuracy(labels: &[usize], truth: &[usize]) -> f64 {
    let same = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    let n = truth.len();
    same.max(n - same) as f64 / n as f64
}
