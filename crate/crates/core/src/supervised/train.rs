use super::cnn::{cnn_forward, squared_error_gradient, ConvNetParams, WeightInit};
use crate::error::{Error, Result};
use crate::ops::rng::seeded;
use crate::ops::Image;
use crate::parallel;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

fn default_channels() -> usize {
    16
}

fn default_init_std() -> f64 {
    0.05
}

fn default_momentum() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserTrainConfig {
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Standard deviation of the Gaussian weight init; 0 starts at zero.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DenoiserTrainConfig {
    pub fn new(epochs: usize, lr: f64, batch: usize, seed: u64) -> Self {
        DenoiserTrainConfig {
            channels: default_channels(),
            epochs,
            lr,
            batch,
            init_std: default_init_std(),
            momentum: default_momentum(),
            seed,
        }
    }

    fn init(&self) -> WeightInit {
        if self.init_std == 0.0 {
            WeightInit::Zero
        } else {
            WeightInit::Gaussian(self.init_std)
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedDenoiser {
    pub params: ConvNetParams,
    /// Mean per-pixel squared error averaged over each epoch's batches.
    pub epoch_loss: Vec<f64>,
    /// Per-pixel MSE of the returned network over all pairs.
    pub final_mse: f64,
    /// Same for the zero-weight (identity) network.
    pub identity_mse: f64,
}

/// Per-pixel mean squared error of `f_theta` over `pairs`.
pub fn denoiser_mse(theta: &ConvNetParams, pairs: &[(Image, Image)]) -> Result<f64> {
    let per = parallel::map_indexed(pairs.len(), |i| -> Result<(f64, usize)> {
        let out = cnn_forward(theta, &pairs[i].0)?;
        let sq = out.as_slice().iter().zip(pairs[i].1.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
        Ok((sq, out.len()))
    });
    let (mut sq, mut n) = (0.0, 0);
    for r in per {
        let (s, k) = r?;
        sq += s;
        n += k;
    }
    Ok(sq / n as f64)
}

/// Mini-batch SGD with momentum on the per-pixel MSE. Batches are drawn
/// from a seeded shuffle each epoch. If the result fits worse than the
/// zero-weight network, the zero weights are returned instead.
pub fn train_denoiser(pairs: &[(Image, Image)], cfg: &DenoiserTrainConfig) -> Result<TrainedDenoiser> {
    if pairs.is_empty() {
        return Err(Error::config("denoiser training needs at least one pair"));
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::config("learning rate must be positive"));
    }
    if cfg.batch == 0 || cfg.channels == 0 {
        return Err(Error::config("batch size and channel count must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::config("momentum must lie in [0, 1)"));
    }
    for (x, t) in pairs {
        x.check_same_shape(t)?;
    }
    let mut rng = seeded(cfg.seed);
    let mut theta = ConvNetParams::init(cfg.channels, cfg.init(), cfg.seed.wrapping_add(1));
    let mut flat = theta.to_flat();
    let mut velocity = vec![0.0; flat.len()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch) {
            let pixels: usize = batch.iter().map(|&i| pairs[i].0.len()).sum();
            let scale = 1.0 / pixels as f64;
            let parts = parallel::map_indexed(batch.len(), |b| {
                let (x, t) = &pairs[batch[b]];
                squared_error_gradient(&theta, x, t, scale)
            });
            let mut grad = vec![0.0; flat.len()];
            let mut sq = 0.0;
            for p in parts {
                let (s, g) = p?;
                sq += s;
                grad.iter_mut().zip(g.to_flat()).for_each(|(a, b)| *a += b);
            }
            for ((w, v), g) in flat.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - cfg.lr * g;
                *w += *v;
            }
            if flat.iter().any(|w| !w.is_finite()) {
                return Err(Error::Numerical("denoiser training diverged; lower the learning rate".into()));
            }
            theta = ConvNetParams::from_flat(cfg.channels, &flat)?;
            total += sq * scale;
            batches += 1;
        }
        epoch_loss.push(total / batches as f64);
    }
    warn_if_rising(&epoch_loss);
    let identity = ConvNetParams::zeros(cfg.channels);
    let identity_mse = denoiser_mse(&identity, pairs)?;
    let mut final_mse = denoiser_mse(&theta, pairs)?;
    if final_mse > identity_mse {
        log::info!("trained denoiser fits worse than identity ({final_mse:e} > {identity_mse:e}); keeping zero weights");
        theta = identity;
        final_mse = identity_mse;
    }
    Ok(TrainedDenoiser { params: theta, epoch_loss, final_mse, identity_mse })
}

fn warn_if_rising(loss: &[f64]) {
    let smooth: Vec<f64> = loss.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    if let Some(i) = smooth.windows(2).position(|w| w[1] > w[0]) {
        log::debug!("smoothed training loss rises after epoch {}", i + 5);
    }
}
