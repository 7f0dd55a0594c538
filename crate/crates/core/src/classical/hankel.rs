//! Spectrum completion by nuclear-norm minimisation of a Hankel lift.

use super::svt::{nuclear_norm, svt};
use super::trace::CostTrace;
use crate::error::{ensure_len, Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `H(n, d)(m)`: `(n - d + 1) x d` with entry `(i, j) = m[i + j]`.
pub fn build_hankel(m: &[Complex64], n: usize, d: usize) -> Result<Array2<Complex64>> {
    ensure_len("Hankel signal", m.len(), n)?;
    if d <= 1 || d >= n {
        return Err(Error::config(format!("pencil parameter must satisfy 1 < d < n, got d={d}, n={n}")));
    }
    Ok(Array2::from_shape_fn((n - d + 1, d), |(i, j)| m[i + j]))
}

/// `H^*`: sums each anti-diagonal back into a length-`n` signal.
fn hankel_adjoint(h: &Array2<Complex64>) -> Vec<Complex64> {
    let (r, d) = h.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); r + d - 1];
    for ((i, j), v) in h.indexed_iter() {
        out[i + j] += v;
    }
    out
}

fn default_rho() -> f64 {
    1.0
}

fn default_iters() -> usize {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HankelConfig {
    pub n: usize,
    /// Defaults to `n / 2`.
    #[serde(default)]
    pub d: Option<usize>,
    pub sample_set: Vec<usize>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
}

impl HankelConfig {
    pub fn new(n: usize, sample_set: Vec<usize>) -> Self {
        HankelConfig {
            n,
            d: None,
            sample_set,
            rho: default_rho(),
            iters: default_iters(),
        }
    }

    pub fn pencil(&self) -> usize {
        self.d.unwrap_or(self.n / 2)
    }
}

#[derive(Clone, Debug)]
pub struct HankelOutcome {
    pub m: Vec<Complex64>,
    pub iterations: usize,
    /// `||H(m)||_*` after each iteration.
    pub trace: CostTrace,
}

/// ADMM for `min ||H(m)||_*` subject to `m = x_hat` on the sample set.
///
/// The `m` update solves the least-squares fit to `Z - Lambda / rho` on the
/// free entries (each is the mean of its anti-diagonal) and copies the
/// samples verbatim, so the constraint holds exactly at every iterate.
pub fn hankel_complete(x_hat: &[Complex64], cfg: &HankelConfig) -> Result<HankelOutcome> {
    let n = cfg.n;
    ensure_len("partial spectrum", x_hat.len(), n)?;
    if cfg.sample_set.is_empty() {
        return Err(Error::config("sample set is empty"));
    }
    if let Some(&bad) = cfg.sample_set.iter().find(|&&k| k >= n) {
        return Err(Error::config(format!("sample index {bad} out of range for n={n}")));
    }
    if !(cfg.rho > 0.0) {
        return Err(Error::config("rho must be positive"));
    }
    let d = cfg.pencil();
    let mut observed = vec![false; n];
    for &k in &cfg.sample_set {
        observed[k] = true;
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut m: Vec<Complex64> = (0..n).map(|k| if observed[k] { x_hat[k] } else { zero }).collect();
    let mut h = build_hankel(&m, n, d)?;
    let mut trace = CostTrace::new();
    trace.push(0, 0.0, nuclear_norm(h.view())?);
    if observed.iter().all(|&o| o) {
        return Ok(HankelOutcome { m, iterations: 0, trace });
    }

    let counts: Vec<f64> = (0..n).map(|k| (k + 1).min(d).min(n - k).min(n - d + 1) as f64).collect();
    let mut lambda = Array2::from_elem(h.dim(), zero);
    let inv_rho = 1.0 / cfg.rho;
    for it in 1..=cfg.iters {
        let z = svt((&h + &(&lambda * inv_rho)).view(), inv_rho)?;
        let target = hankel_adjoint(&(&z - &(&lambda * inv_rho)));
        for k in 0..n {
            if !observed[k] {
                m[k] = target[k] / counts[k];
            }
        }
        h = build_hankel(&m, n, d)?;
        lambda = lambda + (&h - &z) * cfg.rho;
        trace.push(it, 0.0, nuclear_norm(h.view())?);
    }
    Ok(HankelOutcome {
        m,
        iterations: cfg.iters,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::svd::svd;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tones(n: usize, parts: &[(f64, Complex64)]) -> Vec<Complex64> {
        (0..n)
            .map(|k| parts.iter().map(|&(f, a)| a * Complex64::from_polar(1.0, 2.0 * PI * f * k as f64)).sum())
            .collect()
    }

    #[test]
    fn three_sample_layout() {
        let (a, b, cc) = (c(1.0, 0.0), c(2.0, 1.0), c(-3.0, 0.5));
        let h = build_hankel(&[a, b, cc], 3, 2).unwrap();
        assert_eq!(h.dim(), (2, 2));
        assert_eq!([h[[0, 0]], h[[0, 1]], h[[1, 0]], h[[1, 1]]], [a, b, b, cc]);
        assert!(matches!(build_hankel(&[a, b, cc], 3, 3), Err(Error::Config(_))));
    }

    #[test]
    fn constant_signal_has_rank_one() {
        let s = svd(build_hankel(&[c(2.0, -1.0); 10], 10, 4).unwrap().view()).unwrap().s;
        assert!(s[0] > 1.0);
        assert!(s[1..].iter().all(|&v| v < 1e-12 * s[0]));
    }

    #[test]
    fn two_tones_have_rank_two() {
        let m = tones(32, &[(0.11, c(1.0, 0.0)), (0.37, c(0.5, 0.3))]);
        let s = svd(build_hankel(&m, 32, 16).unwrap().view()).unwrap().s;
        assert!(s[2] / s[0] <= 1e-8);
        assert!(s[1] / s[0] > 1e-3);
    }

    #[test]
    fn full_sampling_returns_data() {
        let m = tones(12, &[(0.2, c(1.0, 0.0))]);
        let out = hankel_complete(&m, &HankelConfig::new(12, (0..12).collect())).unwrap();
        assert_eq!(out.m, m);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn samples_are_preserved_bitwise() {
        let m = tones(16, &[(0.13, c(1.0, 0.0))]);
        let omega = vec![0, 2, 3, 7, 11, 12];
        let mut cfg = HankelConfig::new(16, omega.clone());
        cfg.iters = 5;
        let out = hankel_complete(&m, &cfg).unwrap();
        for k in omega {
            assert_eq!(out.m[k], m[k]);
        }
        assert!(hankel_complete(&m, &HankelConfig::new(16, vec![])).is_err());
    }
}
