//! Plug-and-play half-quadratic splitting.

use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::learning::Transform;
use crate::ops::operator::symmetric;
use crate::ops::{cg_solve, CgConfig, Image, LinearOperator, PatchConfig, PatchGrid};
use crate::supervised::{cnn_forward, ConvNetParams};
use serde::{Deserialize, Serialize};

/// Image denoisers that take a noise level `sigma`.
#[derive(Clone, Debug)]
pub enum Denoiser {
    Identity,
    /// Hard-thresholds patch coefficients at `gamma * sigma`, then averages
    /// the overlapping patches back.
    TransformThreshold {
        transform: Transform,
        patch: PatchConfig,
        gamma: f64,
    },
    /// 3x3 median with reflected borders; ignores `sigma`.
    Median3,
    /// Residual CNN; ignores `sigma`.
    ConvNet(ConvNetParams),
}

impl Denoiser {
    pub fn denoise(&self, x: &Image, sigma: f64) -> Result<Image> {
        match self {
            Denoiser::Identity => Ok(x.clone()),
            Denoiser::TransformThreshold { transform, patch, gamma } => {
                let thr = gamma * sigma;
                if thr == 0.0 {
                    return Ok(x.clone());
                }
                let grid = PatchGrid::for_image(x, *patch)?;
                if transform.dim() != grid.patch_len() {
                    return Err(Error::shape("transform size does not match the patch size"));
                }
                let c = transform.apply(grid.extract(x.as_slice()).view());
                let kept = c.mapv(|v| if v.abs() > thr { v } else { 0.0 });
                let back = transform.omega.t().dot(&kept);
                x.with_data(grid.assemble(&back)?)
            }
            Denoiser::Median3 => Ok(median3(x)),
            Denoiser::ConvNet(p) => cnn_forward(p, x),
        }
    }
}

fn median3(x: &Image) -> Image {
    let (rows, cols, frames) = x.dims();
    let refl = |i: isize, n: usize| -> usize {
        let n = n as isize;
        (if i < 0 { -i } else if i >= n { 2 * (n - 1) - i } else { i }).clamp(0, n - 1) as usize
    };
    let mut out = Vec::with_capacity(x.len());
    for f in 0..frames {
        let src = x.frame(f);
        for r in 0..rows {
            for c in 0..cols {
                let mut w = [0.0; 9];
                let mut k = 0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        w[k] = src[refl(r as isize + dy, rows) * cols + refl(c as isize + dx, cols)];
                        k += 1;
                    }
                }
                w.sort_by(f64::total_cmp);
                out.push(w[4]);
            }
        }
    }
    x.with_data(out).expect("same length")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HqsSchedule {
    pub alpha0: f64,
    pub growth: f64,
    pub beta: f64,
}

impl HqsSchedule {
    /// `alpha0 = 0.1 beta`, growth 1.3.
    pub fn with_beta(beta: f64) -> Self {
        HqsSchedule { alpha0: 0.1 * beta, growth: 1.3, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) || !(self.growth > 1.0) || !(self.beta > 0.0) {
            return Err(Error::config("HQS needs alpha0 > 0, growth > 1 and beta > 0"));
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 * self.growth.powi(k as i32)
    }

    /// Noise level handed to the denoiser at iteration `k`: `sqrt(beta / alpha_k)`.
    pub fn sigma(&self, k: usize) -> f64 {
        (self.beta / self.alpha(k)).sqrt()
    }
}

/// Solves `(A^T A + alpha I) x = A^T y + alpha z` from the warm start `z`.
pub fn hqs_data_step(
    y: &Measurements,
    a: &dyn LinearOperator,
    alpha: f64,
    z: &Image,
    cg: &CgConfig,
) -> Result<Image> {
    ensure_len("image for the forward operator", z.len(), a.in_dim())?;
    ensure_len("measurements for the forward operator", y.len(), a.out_dim())?;
    let m = a.out_dim();
    let normal = symmetric(z.len(), |v: &[f64], out: &mut [f64]| {
        let mut av = vec![0.0; m];
        a.apply_into(v, &mut av);
        a.adjoint_into(&av, out);
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += alpha * vi);
    });
    let mut rhs = a.adjoint(&y.y)?;
    rhs.iter_mut().zip(z.as_slice()).for_each(|(r, zi)| *r += alpha * zi);
    z.with_data(cg_solve(&normal, &rhs, cg, z.as_slice())?.x)
}

#[derive(Clone, Debug)]
pub struct PnpOutcome {
    pub x: Image,
    /// `||x_{k+1} - x_k|| / ||x_k||` per iteration.
    pub changes: Vec<f64>,
}

/// Alternates the data step with `den(x, sigma_k)`; returns the last data
/// step iterate.
pub fn pnp_hqs(
    y: &Measurements,
    a: &dyn LinearOperator,
    den: &Denoiser,
    sched: &HqsSchedule,
    iters: usize,
    x0: &Image,
    cg: &CgConfig,
) -> Result<PnpOutcome> {
    sched.validate()?;
    let mut z = x0.clone();
    let mut x = x0.clone();
    let mut changes = Vec::with_capacity(iters);
    for k in 0..iters {
        let next = hqs_data_step(y, a, sched.alpha(k), &z, cg)?;
        let diff: f64 = next.as_slice().iter().zip(x.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
        let base: f64 = x.as_slice().iter().map(|v| v * v).sum();
        changes.push((diff / base.max(f64::MIN_POSITIVE)).sqrt());
        x = next;
        z = den.denoise(&x, sched.sigma(k))?;
    }
    Ok(PnpOutcome { x, changes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::Identity;
    use crate::ops::rng::{normal_vec, seeded};

    fn tight() -> CgConfig {
        CgConfig { tol: 1e-12, max_iters: 200 }
    }

    #[test]
    fn identity_denoiser_converges_to_the_data() {
        let v = normal_vec(&mut seeded(1), 64);
        let y = Measurements::plain(v.clone()).unwrap();
        let s = HqsSchedule { alpha0: 0.1, growth: 1.3, beta: 1.0 };
        let out = pnp_hqs(&y, &Identity::new(64), &Denoiser::Identity, &s, 50, &Image::zeros(8, 8), &tight()).unwrap();
        let err: f64 = out.x.as_slice().iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn zero_gamma_threshold_is_identity() {
        let v = normal_vec(&mut seeded(2), 64);
        let y = Measurements::plain(v).unwrap();
        let s = HqsSchedule::with_beta(1.0);
        let den = Denoiser::TransformThreshold { transform: Transform::dct(4), patch: PatchConfig::square(2, 1), gamma: 0.0 };
        let a = pnp_hqs(&y, &Identity::new(64), &den, &s, 10, &Image::zeros(8, 8), &tight()).unwrap();
        let b = pnp_hqs(&y, &Identity::new(64), &Denoiser::Identity, &s, 10, &Image::zeros(8, 8), &tight()).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn schedule_grows_and_noise_falls() {
        let s = HqsSchedule::with_beta(2.0);
        assert!(s.alpha(3) > s.alpha(2));
        assert!(s.sigma(3) < s.sigma(2));
        assert!(HqsSchedule { growth: 1.0, ..s }.validate().is_err());
    }

    #[test]
    fn median_removes_an_impulse() {
        let mut x = Image::filled(5, 5, 1.0);
        x.set(2, 2, 50.0);
        assert_eq!(Denoiser::Median3.denoise(&x, 0.0).unwrap(), Image::filled(5, 5, 1.0));
    }

    #[test]
    fn threshold_denoiser_keeps_strong_coefficients() {
        let x = Image::filled(8, 8, 0.7);
        let den = Denoiser::TransformThreshold { transform: Transform::dct(16), patch: PatchConfig::square(4, 1), gamma: 1.0 };
        let out = den.denoise(&x, 0.1).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }
}
