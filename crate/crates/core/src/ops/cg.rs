//! Krylov solver for symmetric positive (semi)definite systems.
//!
//! Uses the conjugate-residual recurrence of the CG family: for SPD operators
//! both the residual norm and the energy-norm error decrease monotonically,
//! so warm-started inner solves never increase the quadratic they minimise.

use super::operator::LinearOperator;
use super::vecops::{axpy, dot, norm};
use crate::error::{ensure_len, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x_k||` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

pub fn cg_solve(
    normal_op: &dyn LinearOperator,
    b: &[f64],
    cfg: &CgConfig,
    x0: &[f64],
) -> Result<CgOutcome> {
    let n = normal_op.in_dim();
    ensure_len("cg right-hand side", b.len(), n)?;
    ensure_len("cg initial guess", x0.len(), n)?;
    if cfg.tol <= 0.0 {
        return Err(Error::config("cg tolerance must be positive"));
    }
    let bnorm = norm(b);
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    normal_op.apply_into(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rnorm = norm(&r);
    let mut residuals = vec![rnorm];
    let target = cfg.tol * bnorm;
    if bnorm == 0.0 {
        // Zero right-hand side: the solution is zero.
        x.fill(0.0);
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residuals: vec![0.0],
            converged: true,
        });
    }
    if rnorm <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residuals,
            converged: true,
        });
    }
    let mut ar = vec![0.0; n];
    normal_op.apply_into(&r, &mut ar);
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = dot(&r, &ar);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let apap = dot(&ap, &ap);
        if !rar.is_finite() || !apap.is_finite() {
            return Err(Error::Numerical("NaN in conjugate residual iteration".into()));
        }
        if apap == 0.0 || rar <= 0.0 {
            // r lies in the null space: nothing more to gain.
            break;
        }
        let alpha = rar / apap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        rnorm = norm(&r);
        if !rnorm.is_finite() {
            return Err(Error::Numerical("NaN in conjugate residual iteration".into()));
        }
        residuals.push(rnorm);
        if rnorm <= target {
            converged = true;
            break;
        }
        normal_op.apply_into(&r, &mut ar);
        let rar_new = dot(&r, &ar);
        let beta = rar_new / rar;
        rar = rar_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar[i] + beta * ap[i];
        }
    }
    Ok(CgOutcome {
        x,
        iterations,
        residuals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::{DenseOperator, Identity};
    use crate::ops::rng::{normal_vec, seeded};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded(seed);
        let g = Array2::from_shape_vec((n, n), normal_vec(&mut rng, n * n)).unwrap();
        g.t().dot(&g) + Array2::<f64>::eye(n) * 0.5
    }

    fn gauss_solve(mut a: Array2<f64>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[[i, k]].abs().partial_cmp(&a[[j, k]].abs()).unwrap()).unwrap();
            for j in 0..n {
                a.swap([k, j], [piv, j]);
            }
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[[i, k]] / a[[k, k]];
                for j in k..n {
                    a[[i, j]] -= f * a[[k, j]];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[[k, j]] * x[j]).sum();
            x[k] = (b[k] - s) / a[[k, k]];
        }
        x
    }

    #[test]
    fn identity_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.5];
        let out = cg_solve(&Identity::new(3), &b, &CgConfig::default(), &[0.0; 3]).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DenseOperator::new(spd(4, 1));
        let out = cg_solve(&a, &[0.0; 4], &CgConfig::default(), &[1.0; 4]).unwrap();
        assert_eq!(out.x, vec![0.0; 4]);
    }

    #[test]
    fn matches_gaussian_elimination() {
        let m = spd(6, 7);
        let mut rng = seeded(8);
        let b = normal_vec(&mut rng, 6);
        let oracle = gauss_solve(m.clone(), b.clone());
        let cfg = CgConfig { tol: 1e-14, max_iters: 200 };
        let out = cg_solve(&DenseOperator::new(m), &b, &cfg, &[0.0; 6]).unwrap();
        for (a, o) in out.x.iter().zip(&oracle) {
            assert!((a - o).abs() < 1e-8, "{a} vs {o}");
        }
    }

    #[test]
    fn nan_is_a_breakdown() {
        let mut m = spd(3, 2);
        m[[0, 0]] = f64::NAN;
        let r = cg_solve(&DenseOperator::new(m), &[1.0, 0.0, 0.0], &CgConfig::default(), &[0.0; 3]);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    proptest! {
        #[test]
        fn residual_never_increases(n in 2usize..12, seed in 0u64..1000) {
            let m = spd(n, seed);
            let mut rng = seeded(seed + 1);
            let b = normal_vec(&mut rng, n);
            let cfg = CgConfig { tol: 1e-13, max_iters: 4 * n };
            let out = cg_solve(&DenseOperator::new(m), &b, &cfg, &vec![0.0; n]).unwrap();
            for w in out.residuals.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }
}
