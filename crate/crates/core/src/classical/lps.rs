//! Low-rank plus sparse decomposition of dynamic image stacks.

use super::fista::check_orthonormal;
use super::svt::{nuclear_norm, svt};
use super::trace::CostTrace;
use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::ops::image::Image;
use crate::ops::operator::{op_norm_sq, Identity, LinearOperator, POWER_ITERS};
use crate::ops::threshold::soft_threshold;
use crate::ops::vecops::norm_sq;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpsConfig {
    pub lambda_l: f64,
    pub lambda_s: f64,
    /// Defaults to `0.95 / ||A||^2`.
    #[serde(default)]
    pub step: Option<f64>,
    pub iters: usize,
}

#[derive(Clone, Debug)]
pub struct LpsOutcome {
    pub low_rank: Image,
    pub sparse: Image,
    pub trace: CostTrace,
}

/// `Mat(x)`: one column per frame.
pub fn casorati(x: &[f64], frame_len: usize, frames: usize) -> Array2<f64> {
    Array2::from_shape_fn((frame_len, frames), |(i, t)| x[t * frame_len + i])
}

fn uncasorati(m: &Array2<f64>) -> Vec<f64> {
    let (n, t) = m.dim();
    let mut out = vec![0.0; n * t];
    for f in 0..t {
        for i in 0..n {
            out[f * n + i] = m[[i, f]];
        }
    }
    out
}

/// Proximal gradient on
/// `(1/2)||A(x_L + x_S) - y||^2 + lambda_L ||Mat(x_L)||_* + lambda_S ||W x_S||_1`
/// from zero. `sparsifier` must be orthonormal and defaults to the identity.
pub fn lps_reconstruct(
    y: &Measurements,
    a: &dyn LinearOperator,
    dims: (usize, usize, usize),
    sparsifier: Option<&dyn LinearOperator>,
    cfg: &LpsConfig,
) -> Result<LpsOutcome> {
    let (rows, cols, frames) = dims;
    if frames < 2 {
        return Err(Error::config("low-rank plus sparse needs at least 2 frames"));
    }
    if !(cfg.lambda_l >= 0.0 && cfg.lambda_s >= 0.0) {
        return Err(Error::config("lambda_l and lambda_s must be nonnegative"));
    }
    let n = rows * cols * frames;
    ensure_len("operator input", a.in_dim(), n)?;
    ensure_len("measurements", y.len(), a.out_dim())?;
    let identity = Identity::new(n);
    let w: &dyn LinearOperator = sparsifier.unwrap_or(&identity);
    ensure_len("sparsifier", w.in_dim(), n)?;
    check_orthonormal(w, 1e-8)?;

    let lip = op_norm_sq(a, POWER_ITERS, 1);
    let step = match cfg.step {
        Some(s) if !(s > 0.0) => return Err(Error::config("step must be positive")),
        Some(s) if lip > 0.0 && s > 1.0 / lip => {
            return Err(Error::config(format!("step {s} exceeds 1/||A||^2 = {}", 1.0 / lip)))
        }
        Some(s) => s,
        None if lip > 0.0 => 0.95 / lip,
        None => 1.0,
    };

    let frame_len = rows * cols;
    let cost = |xl: &[f64], xs: &[f64]| -> Result<(f64, f64)> {
        let sum: Vec<f64> = xl.iter().zip(xs).map(|(p, q)| p + q).collect();
        let r: Vec<f64> = a.apply(&sum)?.iter().zip(&y.y).map(|(p, q)| p - q).collect();
        let nuc = nuclear_norm(casorati(xl, frame_len, frames).view())?;
        let l1: f64 = w.apply(xs)?.iter().map(|v| v.abs()).sum();
        Ok((0.5 * norm_sq(&r), cfg.lambda_l * nuc + cfg.lambda_s * l1))
    };

    let mut xl = vec![0.0; n];
    let mut xs = vec![0.0; n];
    let mut trace = CostTrace::new();
    let (d, r) = cost(&xl, &xs)?;
    trace.push(0, d, r);
    for k in 1..=cfg.iters {
        let sum: Vec<f64> = xl.iter().zip(&xs).map(|(p, q)| p + q).collect();
        let resid: Vec<f64> = a.apply(&sum)?.iter().zip(&y.y).map(|(p, q)| p - q).collect();
        let g = a.adjoint(&resid)?;
        let l_arg: Vec<f64> = xl.iter().zip(&g).map(|(p, q)| p - step * q).collect();
        let s_arg: Vec<f64> = xs.iter().zip(&g).map(|(p, q)| p - step * q).collect();
        xl = uncasorati(&svt(casorati(&l_arg, frame_len, frames).view(), step * cfg.lambda_l)?);
        xs = w.adjoint(&soft_threshold(&w.apply(&s_arg)?, step * cfg.lambda_s))?;
        let (d, r) = cost(&xl, &xs)?;
        trace.push(k, d, r);
    }
    Ok(LpsOutcome {
        low_rank: Image::new(rows, cols, frames, xl)?,
        sparse: Image::new(rows, cols, frames, xs)?,
        trace,
    })
}
