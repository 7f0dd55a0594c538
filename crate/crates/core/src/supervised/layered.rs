//! SUPER: layers that alternate a supervised CNN with a PWLS-ULTRA solve
//! pulled towards the network output.

use super::cnn::{cnn_forward, ConvNetParams};
use super::train::{train_denoiser, DenoiserTrainConfig};
use crate::classical::CostTrace;
use crate::error::{Error, Result};
use crate::forward::Measurements;
use crate::io::model_file::{square, ModelCodec, ModelKind, RawModel};
use crate::io::psnr;
use crate::learning::{learn_ultra, Transform, UnionTransformModel};
use crate::ops::{extract_patches, Boundary, CgConfig, Image, LinearOperator, PatchConfig};
use crate::parallel;
use crate::recon::{recon_pwls_ultra_coupled, Coupling, ReconConfig};
use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct SuperModel {
    pub layers: Vec<ConvNetParams>,
    pub mu: f64,
    pub ultra: UnionTransformModel,
    /// Settings of every layer's variational solve.
    pub recon: ReconConfig,
}

impl SuperModel {
    pub fn new(layers: Vec<ConvNetParams>, mu: f64, ultra: UnionTransformModel, recon: ReconConfig) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a layered model needs at least one layer"));
        }
        if !(mu >= 0.0) {
            return Err(Error::config("mu must be nonnegative"));
        }
        recon.validate()?;
        Ok(SuperModel { layers, mu, ultra, recon })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn shares_weights(&self) -> bool {
        self.layers.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Clone, Debug)]
pub struct SuperOutcome {
    pub x: Image,
    /// `x^(1) .. x^(L)`.
    pub layers: Vec<Image>,
    /// Augmented objective of each layer's inner iterations.
    pub traces: Vec<CostTrace>,
}

fn layer_solve(
    y: &Measurements,
    a: &dyn LinearOperator,
    model: &SuperModel,
    x0: &Image,
    target: &Image,
) -> Result<(Image, CostTrace)> {
    let c = Coupling { mu: model.mu, target };
    let out = recon_pwls_ultra_coupled(y, a, &model.ultra, &model.recon, x0, c)?;
    Ok((out.x, out.trace))
}

/// Runs the layers in order. Each layer's variational solve is warm-started
/// at the previous layer's output, so with `mu = 0` layer `l` is exactly
/// PWLS-ULTRA run for `l * recon.outer_iters` iterations from `x0`.
pub fn super_reconstruct(y: &Measurements, a: &dyn LinearOperator, model: &SuperModel, x0: &Image) -> Result<SuperOutcome> {
    let mut current = x0.clone();
    let mut layers = Vec::with_capacity(model.depth());
    let mut traces = Vec::with_capacity(model.depth());
    for theta in &model.layers {
        let u = cnn_forward(theta, &current)?;
        let (x, trace) = layer_solve(y, a, model, &current, &u)?;
        layers.push(x.clone());
        traces.push(trace);
        current = x;
    }
    Ok(SuperOutcome { x: current, layers, traces })
}

/// `||x_hat - S(G(x_hat))|| / ||x_hat||` where `S` is one layer solve
/// warm-started at `x_hat`. Needs a model whose layers share their weights.
pub fn super_fixed_point_residual(y: &Measurements, a: &dyn LinearOperator, model: &SuperModel, x_hat: &Image) -> Result<f64> {
    if !model.shares_weights() {
        return Err(Error::config("the fixed-point residual needs one shared network"));
    }
    let u = cnn_forward(&model.layers[0], x_hat)?;
    let (x, _) = layer_solve(y, a, model, x_hat, &u)?;
    let diff: f64 = x.as_slice().iter().zip(x_hat.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
    let base: f64 = x_hat.as_slice().iter().map(|v| v * v).sum();
    Ok((diff / base).sqrt())
}

/// Reference images with measurements, plus images without measurements
/// used only to learn the transforms.
#[derive(Clone, Debug, Default)]
pub struct TrainSet {
    pub supervised: Vec<(Image, Measurements)>,
    pub unsupervised: Vec<Image>,
}

fn default_layers() -> usize {
    4
}

fn default_k() -> usize {
    3
}

fn default_ultra_iters() -> usize {
    30
}

fn default_stride() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperTrainConfig {
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Defaults to `recon.beta`.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_k")]
    pub ultra_k: usize,
    #[serde(default = "default_ultra_iters")]
    pub ultra_iters: usize,
    /// Patch stride used when collecting transform training patches.
    #[serde(default = "default_stride")]
    pub learn_stride: usize,
    pub recon: ReconConfig,
    pub denoiser: DenoiserTrainConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    pub layer: usize,
    pub train_mse: f64,
    /// MSE of the zero-weight network on the same inputs.
    pub identity_mse: f64,
    pub mean_psnr_after_variational: f64,
}

#[derive(Clone, Debug)]
pub struct SuperTraining {
    pub model: SuperModel,
    pub report: Vec<LayerReport>,
}

impl SuperTraining {
    pub fn report_csv(&self) -> String {
        let mut s = String::from("layer,train_mse,mean_psnr_after_variational\n");
        for r in &self.report {
            s.push_str(&format!("{},{:e},{}\n", r.layer, r.train_mse, r.mean_psnr_after_variational));
        }
        s
    }
}

/// Learns the transforms from `train.unsupervised`, then builds the layers
/// greedily: train the network on the current estimates, then rerun the
/// variational solve with the new network output pinned. `init` gives the
/// starting estimate for each measurement set.
pub fn super_train(
    train: &TrainSet,
    a: &dyn LinearOperator,
    init: &(dyn Fn(&Measurements) -> Result<Image> + Sync),
    cfg: &SuperTrainConfig,
) -> Result<SuperTraining> {
    if train.supervised.is_empty() {
        return Err(Error::config("layered training needs at least one supervised pair"));
    }
    if train.unsupervised.is_empty() {
        return Err(Error::config("layered training needs unsupervised images for the transforms"));
    }
    if cfg.layers == 0 {
        return Err(Error::config("layer count must be at least 1"));
    }
    cfg.recon.validate()?;
    let learn_patch = PatchConfig { stride: cfg.learn_stride, ..cfg.recon.patch };
    let mats = train
        .unsupervised
        .iter()
        .map(|x| extract_patches(x, &learn_patch))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
    let patches = concatenate(Axis(1), &views).map_err(|e| Error::shape(e.to_string()))?;
    let ultra = learn_ultra(patches.view(), cfg.ultra_k, cfg.recon.gamma, cfg.ultra_iters, cfg.seed)?.model;
    let mu = cfg.mu.unwrap_or(cfg.recon.beta);
    let mut model = SuperModel { layers: Vec::with_capacity(cfg.layers), mu, ultra, recon: cfg.recon.clone() };
    let x0s = parallel::map_indexed(train.supervised.len(), |n| init(&train.supervised[n].1))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut current = x0s;
    let mut report = Vec::with_capacity(cfg.layers);
    for layer in 1..=cfg.layers {
        let pairs: Vec<(Image, Image)> =
            current.iter().zip(&train.supervised).map(|(x, (r, _))| (x.clone(), r.clone())).collect();
        let den_cfg = DenoiserTrainConfig { seed: cfg.denoiser.seed.wrapping_add(layer as u64), ..cfg.denoiser.clone() };
        let fit = train_denoiser(&pairs, &den_cfg)?;
        log::info!("layer {layer}: denoiser mse {:e} (identity {:e})", fit.final_mse, fit.identity_mse);
        model.layers.push(fit.params);
        let theta = model.layers.last().expect("just pushed");
        let next = parallel::map_indexed(train.supervised.len(), |n| -> Result<Image> {
            let u = cnn_forward(theta, &current[n])?;
            Ok(layer_solve(&train.supervised[n].1, a, &model, &current[n], &u)?.0)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for (x, (r, _)) in next.iter().zip(&train.supervised) {
            total += psnr(x, r, 1.0)?;
        }
        report.push(LayerReport {
            layer,
            train_mse: fit.final_mse,
            identity_mse: fit.identity_mse,
            mean_psnr_after_variational: total / next.len() as f64,
        });
        current = next;
    }
    Ok(SuperTraining { model, report })
}

fn boundary_code(b: Boundary) -> u32 {
    match b {
        Boundary::Wrap => 0,
        Boundary::Truncate => 1,
    }
}

fn optional_len(v: &Option<Vec<f64>>) -> u32 {
    v.as_ref().map_or(0, |v| v.len() as u32 + 1)
}

/// dims: `n, K, L, channels, patch_rows, patch_cols, stride, boundary,
/// outer_iters, cg_max_iters, per-patch gamma count + 1 (0 = none),
/// tau count + 1`; payload: `mu, beta, gamma, cg_tol, model gamma`, the
/// optional lists, the transforms, then each layer's flat parameters.
impl ModelCodec for SuperModel {
    const KIND: ModelKind = ModelKind::Super;

    fn to_raw(&self) -> RawModel {
        let r = &self.recon;
        let dims = vec![
            self.ultra.dim() as u32,
            self.ultra.k() as u32,
            self.depth() as u32,
            self.layers[0].channels as u32,
            r.patch.patch_rows as u32,
            r.patch.patch_cols as u32,
            r.patch.stride as u32,
            boundary_code(r.patch.boundary),
            r.outer_iters as u32,
            r.cg.max_iters as u32,
            optional_len(&r.gamma_per_patch),
            optional_len(&r.tau),
        ];
        let mut payload = vec![self.mu, r.beta, r.gamma, r.cg.tol, self.ultra.gamma];
        for v in [&r.gamma_per_patch, &r.tau].into_iter().flatten() {
            payload.extend(v);
        }
        for t in &self.ultra.transforms {
            payload.extend(t.omega.iter().copied());
        }
        for l in &self.layers {
            payload.extend(l.to_flat());
        }
        RawModel { kind: Self::KIND, dims, payload }
    }

    fn from_parts(dims: &[u32], payload: &[f64]) -> Result<Self> {
        let bad = || Error::format(5, format!("layered model layout mismatch: dims {dims:?}, {} values", payload.len()));
        if dims.len() != 12 {
            return Err(bad());
        }
        let d: Vec<usize> = dims.iter().map(|&v| v as usize).collect();
        let (n, k, l, c) = (d[0], d[1], d[2], d[3]);
        let n_gpp = d[10].saturating_sub(1);
        let n_tau = d[11].saturating_sub(1);
        let per_layer = ConvNetParams::param_count(c);
        let want = 5 + n_gpp + n_tau + k * n * n + l * per_layer;
        if payload.len() != want || l == 0 || c == 0 {
            return Err(bad());
        }
        let boundary = match d[7] {
            0 => Boundary::Wrap,
            1 => Boundary::Truncate,
            _ => return Err(bad()),
        };
        let mut at = 5;
        let mut take = |len: usize| {
            let s = &payload[at..at + len];
            at += len;
            s
        };
        let gamma_per_patch = (d[10] > 0).then(|| take(n_gpp).to_vec());
        let tau = (d[11] > 0).then(|| take(n_tau).to_vec());
        let transforms = (0..k).map(|_| Transform::unitary(square(take(n * n), n))).collect::<Result<Vec<_>>>()?;
        let layers = (0..l).map(|_| ConvNetParams::from_flat(c, take(per_layer))).collect::<Result<Vec<_>>>()?;
        let recon = ReconConfig {
            beta: payload[1],
            gamma: payload[2],
            gamma_per_patch,
            tau,
            outer_iters: d[8],
            cg: CgConfig { tol: payload[3], max_iters: d[9] },
            patch: PatchConfig { patch_rows: d[4], patch_cols: d[5], stride: d[6], boundary },
            seed: 0,
        };
        SuperModel::new(layers, payload[0], UnionTransformModel::new(transforms, payload[4])?, recon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::Identity;
    use crate::ops::rng::{normal_vec, seeded, uniform_vec};
    use crate::recon::recon_pwls_ultra;
    use crate::supervised::WeightInit;

    fn setup() -> (Image, Measurements, SuperModel) {
        let v = uniform_vec(&mut seeded(1), 64);
        let x = Image::from_vec(8, 8, v.clone()).unwrap();
        let noisy: Vec<f64> = v.iter().zip(normal_vec(&mut seeded(2), 64)).map(|(a, b)| a + 0.1 * b).collect();
        let y = Measurements::new(noisy, Some(vec![1.0; 64]), "identity").unwrap();
        let ultra = UnionTransformModel::new(vec![Transform::dct(16)], 0.1).unwrap();
        let recon = ReconConfig { patch: PatchConfig::square(4, 1), outer_iters: 4, ..ReconConfig::new(0.5, 0.1) };
        let layers = (0..3).map(|s| ConvNetParams::init(2, WeightInit::Gaussian(0.3), s)).collect();
        (x, y, SuperModel::new(layers, 0.0, ultra, recon).unwrap())
    }

    #[test]
    fn zero_mu_decouples_every_layer() {
        let (_, y, model) = setup();
        let x0 = Image::zeros(8, 8);
        let out = super_reconstruct(&y, &Identity::new(64), &model, &x0).unwrap();
        for (l, layer) in out.layers.iter().enumerate() {
            let cfg = ReconConfig { outer_iters: (l + 1) * model.recon.outer_iters, ..model.recon.clone() };
            let plain = recon_pwls_ultra(&y, &Identity::new(64), &model.ultra, &cfg, &x0).unwrap();
            assert_eq!(layer, &plain.x);
        }
    }

    #[test]
    fn pinned_identity_layers_stay_put() {
        let (x, y, mut model) = setup();
        model.mu = 1e6;
        model.layers = vec![ConvNetParams::zeros(2); 3];
        model.recon.outer_iters = 2;
        let out = super_reconstruct(&y, &Identity::new(64), &model, &x).unwrap();
        let d: f64 = out.x.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let n: f64 = x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(d / n <= 1e-3);
        for t in &out.traces {
            assert!(t.is_nonincreasing(1e-8));
        }
    }

    #[test]
    fn model_file_round_trip() {
        let (_, _, mut model) = setup();
        model.mu = 0.25;
        model.recon.tau = Some(vec![1.0; 64]);
        let back = SuperModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back, model);
    }
}
