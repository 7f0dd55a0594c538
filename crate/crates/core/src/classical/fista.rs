//! Analysis-l1 reconstruction by monotone FISTA.

use super::trace::CostTrace;
use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::ops::image::Image;
use crate::ops::operator::{safe_step, LinearOperator};
use crate::ops::rng::{normal_vec, seeded};
use crate::ops::threshold::soft_threshold;
use crate::ops::vecops::{norm, norm_sq, sub};

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Image,
    pub trace: CostTrace,
}

/// Checks `Wt^T Wt = I` and `Wt Wt^T = I` on seeded probes.
pub fn check_orthonormal(wt: &dyn LinearOperator, tol: f64) -> Result<()> {
    if wt.in_dim() != wt.out_dim() {
        return Err(Error::config(format!(
            "analysis operator must be square, got {}x{}",
            wt.out_dim(),
            wt.in_dim()
        )));
    }
    let mut rng = seeded(0x0a7b);
    for _ in 0..3 {
        let v = normal_vec(&mut rng, wt.in_dim());
        let fwd = wt.adjoint(&wt.apply(&v)?)?;
        let bwd = wt.apply(&wt.adjoint(&v)?)?;
        let scale = norm(&v);
        if norm(&sub(&fwd, &v)) > tol * scale || norm(&sub(&bwd, &v)) > tol * scale {
            return Err(Error::config("analysis operator is not orthonormal"));
        }
    }
    Ok(())
}

/// `(1/2)||Ax - y||^2` and `beta ||Wt x||_1`.
pub fn analysis_l1_cost(
    y: &[f64],
    a: &dyn LinearOperator,
    wt: &dyn LinearOperator,
    beta: f64,
    x: &[f64],
) -> Result<(f64, f64)> {
    let r = sub(&a.apply(x)?, y);
    let reg: f64 = wt.apply(x)?.iter().map(|v| v.abs()).sum();
    Ok((0.5 * norm_sq(&r), beta * reg))
}

/// Minimises `(1/2)||Ax - y||^2 + beta ||Wt x||_1` for orthonormal `Wt`.
///
/// Uses the monotone FISTA variant: the accepted iterate is whichever of the
/// proximal point and the previous iterate has lower cost, so the trace
/// never increases. Step `0.95 / ||A||^2` from power iteration.
pub fn fista_analysis_l1(
    y: &Measurements,
    a: &dyn LinearOperator,
    wt: &dyn LinearOperator,
    beta: f64,
    iters: usize,
    x0: &Image,
) -> Result<SolveOutcome> {
    ensure_len("measurements", y.len(), a.out_dim())?;
    ensure_len("initial image", x0.len(), a.in_dim())?;
    ensure_len("analysis operator", wt.in_dim(), a.in_dim())?;
    if !(beta >= 0.0) {
        return Err(Error::config("beta must be nonnegative"));
    }
    check_orthonormal(wt, 1e-8)?;
    let step = safe_step(a, 1);
    let yv = &y.y;

    let cost = |x: &[f64]| analysis_l1_cost(yv, a, wt, beta, x);
    let mut x = x0.as_slice().to_vec();
    let mut x_prev = x.clone();
    let mut v = x.clone();
    let mut t = 1.0f64;
    let (d0, r0) = cost(&x)?;
    let mut fx = d0 + r0;
    let mut trace = CostTrace::new();
    trace.push(0, d0, r0);

    let mut grad = vec![0.0; a.in_dim()];
    let mut resid = vec![0.0; a.out_dim()];
    for k in 1..=iters {
        a.apply_into(&v, &mut resid);
        resid.iter_mut().zip(yv).for_each(|(r, yi)| *r -= yi);
        a.adjoint_into(&resid, &mut grad);
        let moved: Vec<f64> = v.iter().zip(&grad).map(|(vi, gi)| vi - step * gi).collect();
        let coeffs = soft_threshold(&wt.apply(&moved)?, step * beta);
        let z = wt.adjoint(&coeffs)?;
        let (dz, rz) = cost(&z)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        x_prev.copy_from_slice(&x);
        let (d, r) = if dz + rz <= fx {
            x.copy_from_slice(&z);
            fx = dz + rz;
            (dz, rz)
        } else {
            let last = trace.rows.last().unwrap();
            (last.data_term, last.reg_term)
        };
        for i in 0..v.len() {
            v[i] = x[i] + (t / t_next) * (z[i] - x[i]) + ((t - 1.0) / t_next) * (x[i] - x_prev[i]);
        }
        t = t_next;
        trace.push(k, d, r);
    }
    Ok(SolveOutcome {
        x: x0.with_data(x)?,
        trace,
    })
}
