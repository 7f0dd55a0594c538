//! Penalized weighted least squares with an edge-preserving hyperbola
//! penalty on horizontal and vertical first differences.

use super::fista::SolveOutcome;
use super::trace::CostTrace;
use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::ops::image::Image;
use crate::ops::operator::LinearOperator;
use crate::ops::vecops::{dot, norm};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRegConfig {
    pub beta: f64,
    pub delta: f64,
}

impl EdgeRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::config("beta must be nonnegative"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::config("delta must be positive"));
        }
        Ok(())
    }
}

/// `psi(z) = sqrt(z^2 + delta^2)`.
fn psi(z: f64, delta: f64) -> f64 {
    (z * z + delta * delta).sqrt()
}

fn dpsi(z: f64, delta: f64) -> f64 {
    z / psi(z, delta)
}

/// Visits every (a, b) neighbour pair within each frame.
fn for_each_pair(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize)) {
    let (rows, cols, frames) = dims;
    for t in 0..frames {
        let base = t * rows * cols;
        for r in 0..rows {
            for c in 0..cols {
                let i = base + r * cols + c;
                if c + 1 < cols {
                    f(i, i + 1);
                }
                if r + 1 < rows {
                    f(i, i + cols);
                }
            }
        }
    }
}

pub fn edge_penalty(x: &Image, delta: f64) -> f64 {
    let v = x.as_slice();
    let mut s = 0.0;
    for_each_pair(x.dims(), |a, b| s += psi(v[b] - v[a], delta));
    s
}

pub fn edge_penalty_gradient(x: &Image, delta: f64) -> Vec<f64> {
    let v = x.as_slice();
    let mut g = vec![0.0; v.len()];
    for_each_pair(x.dims(), |a, b| {
        let d = dpsi(v[b] - v[a], delta);
        g[b] += d;
        g[a] -= d;
    });
    g
}

/// `(||Ax - y||_W^2, beta R(x))`.
pub fn pwls_ep_cost(y: &Measurements, a: &dyn LinearOperator, cfg: &EdgeRegConfig, x: &Image) -> Result<(f64, f64)> {
    let w = y.require_weights()?;
    let ax = a.apply(x.as_slice())?;
    let data = ax.iter().zip(&y.y).zip(w).map(|((p, q), wi)| wi * (p - q) * (p - q)).sum();
    Ok((data, cfg.beta * edge_penalty(x, cfg.delta)))
}

/// Gradient of the full cost: `2 A^T W (Ax - y) + beta grad R(x)`.
pub fn pwls_ep_gradient(y: &Measurements, a: &dyn LinearOperator, cfg: &EdgeRegConfig, x: &Image) -> Result<Vec<f64>> {
    let w = y.require_weights()?;
    let ax = a.apply(x.as_slice())?;
    let r: Vec<f64> = ax.iter().zip(&y.y).zip(w).map(|((p, q), wi)| 2.0 * wi * (p - q)).collect();
    let mut g = a.adjoint(&r)?;
    if cfg.beta != 0.0 {
        for (gi, ri) in g.iter_mut().zip(edge_penalty_gradient(x, cfg.delta)) {
            *gi += cfg.beta * ri;
        }
    }
    Ok(g)
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking, so every accepted step lowers the cost.
pub fn pwls_ep(
    y: &Measurements,
    a: &dyn LinearOperator,
    cfg: &EdgeRegConfig,
    iters: usize,
    x0: &Image,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    y.require_weights()?;
    ensure_len("measurements", y.len(), a.out_dim())?;
    ensure_len("initial image", x0.len(), a.in_dim())?;
    let mut x = x0.clone();
    let (d, r) = pwls_ep_cost(y, a, cfg, &x)?;
    let mut f = d + r;
    let mut trace = CostTrace::new();
    trace.push(0, d, r);
    let mut g = pwls_ep_gradient(y, a, cfg, &x)?;
    let g0 = norm(&g);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for k in 1..=iters {
        let gn2 = dot(&g, &g);
        if gn2.sqrt() <= 1e-14 * g0.max(1.0) {
            break;
        }
        if let Some((s, dg)) = &prev {
            let sy = dot(s, dg);
            if sy > 0.0 {
                step = dot(s, s) / sy;
            }
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.as_slice().iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let xt = x.with_data(trial)?;
            let (dt, rt) = pwls_ep_cost(y, a, cfg, &xt)?;
            if dt + rt <= f - 1e-4 * step * gn2 {
                accepted = Some((xt, dt, rt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, dt, rt)) = accepted else {
            trace.push(k, trace.rows[k - 1].data_term, trace.rows[k - 1].reg_term);
            break;
        };
        let gt = pwls_ep_gradient(y, a, cfg, &xt)?;
        let s: Vec<f64> = xt.as_slice().iter().zip(x.as_slice()).map(|(p, q)| p - q).collect();
        let dg: Vec<f64> = gt.iter().zip(&g).map(|(p, q)| p - q).collect();
        prev = Some((s, dg));
        x = xt;
        g = gt;
        f = dt + rt;
        trace.push(k, dt, rt);
    }
    Ok(SolveOutcome { x, trace })
}
