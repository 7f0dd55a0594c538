//! PWLS-ULTRA: weighted least squares with a union-of-transforms prior,
//! alternating exact clustering/coding with a Krylov image update.

use super::config::{weighted_coverage, ReconConfig};
use crate::classical::CostTrace;
use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::learning::{ClusterAssignment, Transform, UnionTransformModel};
use crate::ops::operator::symmetric;
use crate::ops::{cg_solve, Image, LinearOperator, PatchGrid};
use crate::parallel;
use ndarray::Array2;

#[derive(Clone, Debug)]
pub struct UltraReconOutcome {
    pub x: Image,
    pub assignment: ClusterAssignment,
    /// `J(x, y)` at the start and after every outer iteration. With a
    /// coupling target the `mu ||x - u||^2` term is folded into `reg_term`.
    pub trace: CostTrace,
}

/// Quadratic pull `mu ||x - target||^2` added to the objective.
#[derive(Clone, Copy, Debug)]
pub struct Coupling<'a> {
    pub mu: f64,
    pub target: &'a Image,
}

#[derive(Clone, Copy)]
enum Prior<'a> {
    Union(&'a UnionTransformModel),
    Single(&'a Transform),
}

impl Prior<'_> {
    fn transforms(&self) -> Vec<&Transform> {
        match self {
            Prior::Union(m) => m.transforms.iter().collect(),
            Prior::Single(t) => vec![*t],
        }
    }
}

fn hard(v: f64, gamma: f64) -> f64 {
    if v.abs() > gamma {
        v
    } else {
        0.0
    }
}

fn patch_cost(c: impl Iterator<Item = f64>, g2: f64) -> f64 {
    c.map(|v| (v * v).min(g2)).sum()
}

struct Coding {
    labels: Vec<usize>,
    codes: Array2<f64>,
    /// `min_k ||Omega_k P_j x - z_j||^2 + gamma_j^2 ||z_j||_0` per patch.
    costs: Vec<f64>,
}

fn code(prior: Prior, patches: &Array2<f64>, gammas: &[f64]) -> Coding {
    let (n, s) = patches.dim();
    match prior {
        Prior::Single(t) => {
            let c = t.apply(patches.view());
            let costs = parallel::map_indexed(s, |j| patch_cost(c.column(j).iter().copied(), gammas[j] * gammas[j]));
            let codes = Array2::from_shape_fn((n, s), |(r, j)| hard(c[[r, j]], gammas[j]));
            Coding { labels: vec![0; s], codes, costs }
        }
        Prior::Union(m) => {
            let coeffs: Vec<Array2<f64>> = m.transforms.iter().map(|t| t.apply(patches.view())).collect();
            let best = parallel::map_indexed(s, |j| {
                let g2 = gammas[j] * gammas[j];
                let mut best = (f64::INFINITY, 0);
                for (k, c) in coeffs.iter().enumerate() {
                    let cost = patch_cost(c.column(j).iter().copied(), g2);
                    if cost < best.0 {
                        best = (cost, k);
                    }
                }
                best
            });
            let labels: Vec<usize> = best.iter().map(|b| b.1).collect();
            let codes = Array2::from_shape_fn((n, s), |(r, j)| hard(coeffs[labels[j]][[r, j]], gammas[j]));
            Coding { labels, costs: best.into_iter().map(|b| b.0).collect(), codes }
        }
    }
}

/// `sum_j tau_j P_j^T Omega_{k_j}^T z_j`.
fn synthesis(grid: &PatchGrid, transforms: &[&Transform], coding: &Coding, tau: &[f64]) -> Vec<f64> {
    let n = grid.patch_len();
    let cols = parallel::map_indexed(coding.labels.len(), |j| {
        let z = coding.codes.column(j);
        if tau[j] == 0.0 || z.iter().all(|&v| v == 0.0) {
            return None;
        }
        let omega = &transforms[coding.labels[j]].omega;
        let mut out = vec![0.0; n];
        for (r, &zr) in z.iter().enumerate() {
            if zr != 0.0 {
                for (o, w) in out.iter_mut().zip(omega.row(r)) {
                    *o += w * zr;
                }
            }
        }
        Some(out)
    });
    let mut acc = vec![0.0; grid.image_len()];
    for (j, col) in cols.into_iter().enumerate() {
        if let Some(col) = col {
            for (&i, v) in grid.indices(j).iter().zip(col) {
                acc[i as usize] += tau[j] * v;
            }
        }
    }
    acc
}

fn weighted_residual(a: &dyn LinearOperator, x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    let ax = a.apply(x)?;
    Ok(ax.iter().zip(y).zip(w).map(|((p, q), wi)| wi * (p - q) * (p - q)).sum())
}

fn run(
    y: &Measurements,
    a: &dyn LinearOperator,
    prior: Prior,
    cfg: &ReconConfig,
    x0: &Image,
    coupling: Option<Coupling>,
) -> Result<UltraReconOutcome> {
    let w = y.require_weights()?;
    ensure_len("image for the forward operator", x0.len(), a.in_dim())?;
    ensure_len("measurements for the forward operator", y.len(), a.out_dim())?;
    let transforms = prior.transforms();
    if transforms.iter().any(|t| !t.unitary) {
        return Err(Error::config("the image update requires unitary transforms"));
    }
    let grid = PatchGrid::for_image(x0, cfg.patch)?;
    if transforms[0].dim() != grid.patch_len() {
        return Err(Error::shape(format!(
            "transforms act on length {} patches, the patch grid yields {}",
            transforms[0].dim(),
            grid.patch_len()
        )));
    }
    let (gammas, tau) = cfg.patch_params(&grid)?;
    let (mu, target) = match coupling {
        Some(c) => {
            x0.check_same_shape(c.target)?;
            if !(c.mu >= 0.0) {
                return Err(Error::config("coupling weight must be nonnegative"));
            }
            (c.mu, Some(c.target))
        }
        None => (0.0, None),
    };
    let beta = cfg.beta;
    let diag: Vec<f64> = weighted_coverage(&grid, &tau).iter().map(|c| beta * c + mu).collect();
    let m = a.out_dim();
    let normal = symmetric(x0.len(), |v: &[f64], out: &mut [f64]| {
        let mut av = vec![0.0; m];
        a.apply_into(v, &mut av);
        av.iter_mut().zip(w).for_each(|(p, wi)| *p *= wi);
        a.adjoint_into(&av, out);
        for ((o, d), vi) in out.iter_mut().zip(&diag).zip(v) {
            *o += d * vi;
        }
    });
    let wy: Vec<f64> = y.y.iter().zip(w).map(|(p, q)| p * q).collect();
    let mut b_data = a.adjoint(&wy)?;
    if let Some(u) = target {
        b_data.iter_mut().zip(u.as_slice()).for_each(|(b, ui)| *b += mu * ui);
    }

    let objective = |x: &[f64], coding: &Coding| -> Result<(f64, f64)> {
        let data = weighted_residual(a, x, &y.y, w)?;
        let mut reg = 0.0;
        for (c, t) in coding.costs.iter().zip(&tau) {
            reg += t * c;
        }
        reg *= beta;
        if let Some(u) = target {
            reg += mu * x.iter().zip(u.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        }
        Ok((data, reg))
    };

    let mut x = x0.as_slice().to_vec();
    let mut coding = code(prior, &grid.extract(&x), &gammas);
    let mut trace = CostTrace::new();
    let (d0, r0) = objective(&x, &coding)?;
    trace.push(0, d0, r0);
    for it in 1..=cfg.outer_iters {
        let mut rhs = b_data.clone();
        if beta != 0.0 {
            let s = synthesis(&grid, &transforms, &coding, &tau);
            rhs.iter_mut().zip(s).for_each(|(r, v)| *r += beta * v);
        }
        x = cg_solve(&normal, &rhs, &cfg.cg, &x)?.x;
        coding = code(prior, &grid.extract(&x), &gammas);
        let (d, r) = objective(&x, &coding)?;
        trace.push(it, d, r);
    }
    Ok(UltraReconOutcome {
        x: x0.with_data(x)?,
        assignment: ClusterAssignment { labels: coding.labels },
        trace,
    })
}

/// Minimises `||Ax - y||_W^2 + beta sum_j tau_j (||Omega_{k_j} P_j x - z_j||^2
/// + gamma_j^2 ||z_j||_0)` over the image, codes and cluster labels. The
/// model's own `gamma` is ignored in favour of `cfg`.
pub fn recon_pwls_ultra(
    y: &Measurements,
    a: &dyn LinearOperator,
    model: &UnionTransformModel,
    cfg: &ReconConfig,
    x0: &Image,
) -> Result<UltraReconOutcome> {
    run(y, a, Prior::Union(model), cfg, x0, None)
}

/// Same objective with one transform and no clustering.
pub fn recon_pwls_transform(
    y: &Measurements,
    a: &dyn LinearOperator,
    transform: &Transform,
    cfg: &ReconConfig,
    x0: &Image,
) -> Result<UltraReconOutcome> {
    run(y, a, Prior::Single(transform), cfg, x0, None)
}

/// PWLS-ULTRA with an extra `mu ||x - u||^2` pull towards `coupling.target`.
pub fn recon_pwls_ultra_coupled(
    y: &Measurements,
    a: &dyn LinearOperator,
    model: &UnionTransformModel,
    cfg: &ReconConfig,
    x0: &Image,
    coupling: Coupling,
) -> Result<UltraReconOutcome> {
    run(y, a, Prior::Union(model), cfg, x0, Some(coupling))
}
