//! Measurement containers, operator descriptions and noise simulation.

use super::blur::CircularBlur;
use super::dft::{build_masked_dft_real, FourierMask};
use super::radon::{CtGeometry, Radon};
use crate::error::{ensure_len, Error, Result};
use crate::ops::image::Image;
use crate::ops::operator::{Field, Identity, LinearOperator};
use crate::ops::rng::{normal_vec, seeded};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Serializable description of a forward operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity { rows: usize, cols: usize, frames: usize },
    Ct(CtGeometry),
    MaskedDft { rows: usize, cols: usize, fraction: f64, seed: u64 },
    Blur { rows: usize, cols: usize, size: usize },
}

impl OperatorSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            OperatorSpec::Identity { .. } => "identity",
            OperatorSpec::Ct(_) => "ct",
            OperatorSpec::MaskedDft { .. } => "masked-dft",
            OperatorSpec::Blur { .. } => "blur",
        }
    }

    /// `(rows, cols, frames)` of the images the operator acts on.
    pub fn image_dims(&self) -> (usize, usize, usize) {
        match *self {
            OperatorSpec::Identity { rows, cols, frames } => (rows, cols, frames),
            OperatorSpec::Ct(ref g) => (g.rows, g.cols, 1),
            OperatorSpec::MaskedDft { rows, cols, .. } | OperatorSpec::Blur { rows, cols, .. } => {
                (rows, cols, 1)
            }
        }
    }

    pub fn build(&self) -> Result<Arc<dyn LinearOperator>> {
        Ok(match self {
            OperatorSpec::Identity { rows, cols, frames } => Arc::new(Identity::new(rows * cols * frames)),
            OperatorSpec::Ct(g) => Arc::new(Radon::new(g)?),
            OperatorSpec::MaskedDft { rows, cols, fraction, seed } => {
                Arc::new(build_masked_dft_real(FourierMask::random(*rows, *cols, *fraction, *seed)?))
            }
            OperatorSpec::Blur { rows, cols, size } => Arc::new(CircularBlur::uniform(*rows, *cols, *size)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub y: Vec<f64>,
    /// Diagonal of `W`, same length as `y`.
    pub weights: Option<Vec<f64>>,
    pub operator_tag: String,
}

impl Measurements {
    pub fn new(y: Vec<f64>, weights: Option<Vec<f64>>, operator_tag: impl Into<String>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::value("measurements must be finite"));
        }
        if let Some(w) = &weights {
            ensure_len("weights", w.len(), y.len())?;
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::value("weights must be finite and nonnegative"));
            }
        }
        Ok(Measurements {
            y,
            weights,
            operator_tag: operator_tag.into(),
        })
    }

    /// Unweighted data (`W = I`).
    pub fn plain(y: Vec<f64>) -> Result<Self> {
        Self::new(y, None, "generic")
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn require_weights(&self) -> Result<&[f64]> {
        self.weights
            .as_deref()
            .ok_or_else(|| Error::config("this solver needs statistical weights W"))
    }

    /// Weights, or all ones when absent. For complex data a weight applies to
    /// both slots of its interleaved pair.
    pub fn weights_or_ones(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.y.len()])
    }
}

fn line_integrals(x: &Image, geom: &CtGeometry) -> Result<Vec<f64>> {
    ensure_len("CT image", x.len(), geom.image_len())?;
    Radon::new(geom)?.apply(x.as_slice())
}

/// Poisson transmission data: `c_i ~ Poisson(I0 exp(-l_i))`,
/// `y_i = -log(max(c_i, 1) / I0)`, `W_ii = max(c_i, 1)`.
pub fn simulate_ct(x_true: &Image, geom: &CtGeometry, i0: f64, seed: u64) -> Result<Measurements> {
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::value("incident photon count I0 must be positive"));
    }
    let ell = line_integrals(x_true, geom)?;
    let mut rng = seeded(seed);
    let mut y = Vec::with_capacity(ell.len());
    let mut w = Vec::with_capacity(ell.len());
    for &l in &ell {
        let mean = i0 * (-l).exp();
        let counts = if mean > 0.0 {
            let p = Poisson::new(mean).map_err(|e| Error::value(format!("Poisson mean {mean}: {e}")))?;
            rng.sample(p)
        } else {
            0.0
        };
        let c = counts.max(1.0);
        y.push(-(c / i0).ln());
        w.push(c);
    }
    Measurements::new(y, Some(w), "ct")
}

/// Infinite-dose limit of [`simulate_ct`]: `y = l`, `W = I0 exp(-l)`.
pub fn simulate_ct_noiseless(x_true: &Image, geom: &CtGeometry, i0: f64) -> Result<Measurements> {
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::value("incident photon count I0 must be positive"));
    }
    let ell = line_integrals(x_true, geom)?;
    let w = ell.iter().map(|l| i0 * (-l).exp()).collect();
    Measurements::new(ell, Some(w), "ct")
}

/// `y = A x + sigma n` with seeded standard normal `n`. For complex
/// operators the noise is circular: each component has variance
/// `sigma^2 / 2`. Weights are `1 / sigma^2`, absent when `sigma = 0`.
pub fn simulate_gaussian(
    x_true: &Image,
    op: &dyn LinearOperator,
    sigma: f64,
    seed: u64,
) -> Result<Measurements> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::value("noise level must be finite and nonnegative"));
    }
    let mut y = op.apply(x_true.as_slice())?;
    if sigma > 0.0 {
        let scale = match op.field() {
            Field::Real => sigma,
            Field::Complex => sigma / 2f64.sqrt(),
        };
        let n = normal_vec(&mut seeded(seed), y.len());
        for (yi, ni) in y.iter_mut().zip(&n) {
            *yi += scale * ni;
        }
    }
    let weights = (sigma > 0.0).then(|| vec![1.0 / (sigma * sigma); y.len()]);
    Measurements::new(y, weights, "gaussian")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phantom() -> Image {
        Image::from_fn(16, 16, |r, c| if (4..12).contains(&r) && (5..11).contains(&c) { 0.2 } else { 0.0 })
    }

    #[test]
    fn noiseless_ct_is_exact() {
        let g = CtGeometry::new(16, 16, 6).with_pixel_size(0.5);
        let x = phantom();
        let m = simulate_ct_noiseless(&x, &g, 1e4).unwrap();
        let ell = Radon::new(&g).unwrap().apply(x.as_slice()).unwrap();
        assert_eq!(m.y, ell);
        for (w, l) in m.weights.unwrap().iter().zip(&ell) {
            assert_eq!(*w, 1e4 * (-l).exp());
        }
    }

    #[test]
    fn empty_object_gives_near_zero_data() {
        let g = CtGeometry::new(16, 16, 6);
        let m = simulate_ct(&Image::zeros(16, 16), &g, 1e6, 3).unwrap();
        assert!(m.y.iter().all(|v| v.abs() < 0.01));
        assert!(m.weights.unwrap().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn ct_noise_is_seeded() {
        let g = CtGeometry::new(16, 16, 6).with_pixel_size(0.5);
        let x = phantom();
        let a = simulate_ct(&x, &g, 1e4, 1).unwrap();
        let b = simulate_ct(&x, &g, 1e4, 1).unwrap();
        let c = simulate_ct(&x, &g, 1e4, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y, c.y);
        assert!(matches!(simulate_ct(&x, &g, 0.0, 1), Err(Error::Value(_))));
    }

    #[test]
    fn gaussian_noise_statistics() {
        let x = Image::from_fn(100, 100, |r, c| (r + c) as f64 * 0.01);
        let id = Identity::new(10_000);
        let clean = simulate_gaussian(&x, &id, 0.0, 5).unwrap();
        assert_eq!(clean.y, x.as_slice());
        assert!(clean.weights.is_none());
        let noisy = simulate_gaussian(&x, &id, 0.3, 5).unwrap();
        let diffs: Vec<f64> = noisy.y.iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        assert!((var.sqrt() - 0.3).abs() < 0.05 * 0.3);
        assert_eq!(noisy, simulate_gaussian(&x, &id, 0.3, 5).unwrap());
    }

    #[test]
    fn complex_noise_has_total_variance_sigma_squared() {
        let spec = OperatorSpec::MaskedDft { rows: 64, cols: 64, fraction: 1.0, seed: 0 };
        let op = spec.build().unwrap();
        let x = Image::zeros(64, 64);
        let m = simulate_gaussian(&x, op.as_ref(), 0.2, 8).unwrap();
        let power = m.y.iter().map(|v| v * v).sum::<f64>() / (m.y.len() / 2) as f64;
        assert!((power.sqrt() - 0.2).abs() < 0.05 * 0.2);
    }

    #[test]
    fn weights_are_validated() {
        assert!(Measurements::new(vec![1.0, 2.0], Some(vec![1.0]), "x").is_err());
        assert!(Measurements::new(vec![1.0], Some(vec![-1.0]), "x").is_err());
        assert!(Measurements::plain(vec![1.0]).unwrap().require_weights().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = OperatorSpec::Ct(CtGeometry::new(8, 8, 3));
        let text = serde_json::to_string(&spec).unwrap();
        let back: OperatorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        assert_eq!(back.build().unwrap().in_dim(), 64);
    }
}
