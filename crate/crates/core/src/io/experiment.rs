//! JSON-configured tasks. The command line front end is a thin shell over
//! [`run_experiment`].
//!
//! A config is one flat JSON object with a `task` key. The keys `seed`,
//! `timing` and `trace` are shared by every task; everything else belongs to
//! the task and unknown keys are rejected. Relative paths are resolved
//! against the directory the config was loaded from.

use super::image_file::{read_image, write_image, write_pgm};
use super::metrics::{metrics_csv, psnr, rmse, MetricsRow};
use super::model_file::ModelCodec;
use super::phantom::{dynamic_phantom, phantom_variant, shepp_logan};
use crate::classical::{
    fista_analysis_l1, hankel_complete, lps_reconstruct, pwls_ep, CostTrace, EdgeRegConfig, HankelConfig, LpsConfig,
};
use crate::error::{Error, Result};
use crate::forward::{fbp, simulate_ct, simulate_gaussian, Measurements, OperatorSpec};
use crate::learning::{
    learn_dictionary_soup, learn_multilayer, learn_transform, learn_ultra, Dictionary, Transform, UnionTransformModel,
};
use crate::ops::bases::Haar2;
use crate::ops::{extract_patches, CgConfig, Identity, Image, LinearOperator, PatchConfig};
use crate::recon::{pnp_hqs, recon_dictionary, recon_pwls_ultra, Denoiser, HqsSchedule, ReconConfig};
use crate::supervised::{
    super_reconstruct, super_train, train_denoiser, ConvNetParams, DenoiserTrainConfig, SuperModel, SuperTrainConfig,
    TrainSet,
};
use ndarray::{concatenate, Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Measurements together with the operator that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub operator: OperatorSpec,
    pub measurements: Measurements,
}

impl MeasurementFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }
}

fn default_size() -> usize {
    64
}

fn default_peak() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomTask {
    #[serde(default = "default_size")]
    pub rows: usize,
    #[serde(default = "default_size")]
    pub cols: usize,
    /// Seeded perturbation of Shepp-Logan instead of the standard layout.
    #[serde(default)]
    pub variant: bool,
    /// More than one frame gives the dynamic phantom.
    #[serde(default = "default_frames")]
    pub frames: usize,
}

fn default_frames() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Noise {
    None,
    /// Transmission counts; CT only.
    Poisson { i0: f64 },
    Gaussian { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    pub image: PathBuf,
    pub operator: OperatorSpec,
    pub noise: Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnMethod {
    Transform,
    Ultra,
    Dict,
    Multilayer,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnTask {
    pub method: LearnMethod,
    pub images: Vec<PathBuf>,
    pub patch: PatchConfig,
    /// Sparsity threshold; the dictionary learner's `lambda`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Per-layer thresholds of the multi-layer learner.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub atoms: Option<usize>,
    #[serde(default)]
    pub depth: Option<usize>,
    pub iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconMethod {
    Fbp,
    Fista,
    PwlsEp,
    PwlsUltra,
    Dict,
    Pnp,
    Lps,
    Hankel,
}

impl ReconMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReconMethod::Fbp => "fbp",
            ReconMethod::Fista => "fista",
            ReconMethod::PwlsEp => "pwls-ep",
            ReconMethod::PwlsUltra => "pwls-ultra",
            ReconMethod::Dict => "dict",
            ReconMethod::Pnp => "pnp",
            ReconMethod::Lps => "lps",
            ReconMethod::Hankel => "hankel",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sparsifier {
    Identity,
    #[default]
    Haar,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FistaParams {
    pub beta: f64,
    pub iters: usize,
    #[serde(default)]
    pub sparsifier: Sparsifier,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeParams {
    pub beta: f64,
    pub delta: f64,
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DenoiserSpec {
    Identity,
    Median,
    TransformThreshold { model: PathBuf, patch: PatchConfig, gamma: f64 },
    Convnet { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnpParams {
    pub denoiser: DenoiserSpec,
    pub schedule: HqsSchedule,
    pub iters: usize,
    #[serde(default)]
    pub cg: CgConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HankelParams {
    pub config: HankelConfig,
    /// Real and imaginary parts of the partial signal; unsampled entries
    /// are ignored.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconTask {
    pub method: ReconMethod,
    #[serde(default)]
    pub measurements: Option<PathBuf>,
    /// `fbp`, `adjoint`, `zero` or an image path. Defaults to `fbp` for CT
    /// and `adjoint` otherwise.
    #[serde(default)]
    pub init: Option<String>,
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub fista: Option<FistaParams>,
    #[serde(default)]
    pub edge: Option<EdgeParams>,
    #[serde(default)]
    pub ultra: Option<ReconConfig>,
    #[serde(default)]
    pub pnp: Option<PnpParams>,
    #[serde(default)]
    pub lps: Option<LpsConfig>,
    #[serde(default)]
    pub hankel: Option<HankelParams>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPaths {
    pub input: PathBuf,
    pub target: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainTask {
    pub pairs: Vec<PairPaths>,
    pub denoiser: DenoiserTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisedPaths {
    pub reference: PathBuf,
    pub measurements: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperTrainTask {
    pub supervised: Vec<SupervisedPaths>,
    pub unsupervised: Vec<PathBuf>,
    pub config: SuperTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperReconTask {
    pub measurements: PathBuf,
    pub model: PathBuf,
    #[serde(default)]
    pub init: Option<String>,
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default = "default_peak")]
    pub peak: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedImage {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsTask {
    pub reference: PathBuf,
    pub images: Vec<NamedImage>,
    #[serde(default = "default_peak")]
    pub peak: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Task {
    Phantom(PhantomTask),
    Simulate(SimulateTask),
    Learn(LearnTask),
    Recon(ReconTask),
    Train(TrainTask),
    SuperTrain(SuperTrainTask),
    SuperRecon(SuperReconTask),
    Metrics(MetricsTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Phantom(_) => "phantom",
            Task::Simulate(_) => "simulate",
            Task::Learn(_) => "learn",
            Task::Recon(_) => "recon",
            Task::Train(_) => "train",
            Task::SuperTrain(_) => "super-train",
            Task::SuperRecon(_) => "super-recon",
            Task::Metrics(_) => "metrics",
        }
    }

    fn needs_seed(&self) -> bool {
        match self {
            Task::Phantom(p) => p.variant,
            Task::Simulate(s) => !matches!(s.noise, Noise::None),
            Task::Learn(l) => matches!(l.method, LearnMethod::Ultra | LearnMethod::Dict),
            Task::Train(_) | Task::SuperTrain(_) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: Option<u64>,
    /// Fill the runtime column of metrics files (makes them run-dependent).
    pub timing: bool,
    /// Write per-iteration cost traces.
    pub trace: bool,
    pub base_dir: PathBuf,
    /// The JSON object the config came from, echoed into the manifest.
    pub echo: Value,
}

const SHARED_KEYS: [&str; 3] = ["seed", "timing", "trace"];

impl ExperimentConfig {
    pub fn from_value(value: Value, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let Value::Object(mut map) = value.clone() else {
            return Err(Error::config("experiment config must be a JSON object"));
        };
        let mut shared = serde_json::Map::new();
        for k in SHARED_KEYS {
            if let Some(v) = map.remove(k) {
                shared.insert(k.to_string(), v);
            }
        }
        let seed = match shared.get("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| Error::config("seed must be a nonnegative integer"))?),
        };
        let flag = |k: &str| -> Result<bool> {
            match shared.get(k) {
                None => Ok(false),
                Some(v) => v.as_bool().ok_or_else(|| Error::config(format!("`{k}` must be true or false"))),
            }
        };
        let task: Task = serde_json::from_value(Value::Object(map)).map_err(|e| Error::config(e.to_string()))?;
        if task.needs_seed() && seed.is_none() {
            return Err(Error::Usage(format!("task `{}` is stochastic and needs a `seed`", task.name())));
        }
        Ok(ExperimentConfig {
            timing: flag("timing")?,
            trace: flag("trace")?,
            task,
            seed,
            base_dir: base_dir.into(),
            echo: value,
        })
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Self::from_value(value, base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&std::fs::read_to_string(path)?, base)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Files written by one run, relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub outputs: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<String>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.path(name), body)?;
        Ok(())
    }

    fn image(&mut self, stem: &str, x: &Image) -> Result<()> {
        write_image(self.path(&format!("{stem}.bfi")), x)?;
        if x.frames() == 1 {
            write_pgm(self.path(&format!("{stem}.pgm")), x)?;
        }
        Ok(())
    }
}

fn missing(method: &str, field: &str) -> Error {
    Error::Usage(format!("{method} needs field `{field}`"))
}

fn trace_csv(trace: &CostTrace) -> String {
    trace.to_csv()
}

fn series_csv(header: &str, values: &[f64]) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:e}");
    }
    s
}

/// Dispatches the task, writes its artifacts and `manifest.json` into
/// `out_dir`. Equal configs give byte-identical files unless `timing` is on.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<RunReport> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = Writer { dir, outputs: Vec::new() };
    match &cfg.task {
        Task::Phantom(t) => run_phantom(cfg, t, &mut w)?,
        Task::Simulate(t) => run_simulate(cfg, t, &mut w)?,
        Task::Learn(t) => run_learn(cfg, t, &mut w)?,
        Task::Recon(t) => run_recon(cfg, t, &mut w)?,
        Task::Train(t) => run_train(cfg, t, &mut w)?,
        Task::SuperTrain(t) => run_super_train(cfg, t, &mut w)?,
        Task::SuperRecon(t) => run_super_recon(cfg, t, &mut w)?,
        Task::Metrics(t) => run_metrics(cfg, t, &mut w)?,
    }
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "task": cfg.task.name(),
        "seed": cfg.seed,
        "config": cfg.echo,
        "outputs": w.outputs,
    });
    let body = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(dir.join("manifest.json"), body)?;
    w.outputs.push("manifest.json".into());
    Ok(RunReport { outputs: w.outputs })
}

fn run_phantom(cfg: &ExperimentConfig, t: &PhantomTask, w: &mut Writer) -> Result<()> {
    let x = match (t.variant, t.frames) {
        (true, 1) => phantom_variant(t.rows, t.cols, cfg.seed())?,
        (true, _) => return Err(Error::config("variants are single-frame")),
        (false, 1) => shepp_logan(t.rows, t.cols)?,
        (false, f) => dynamic_phantom(t.rows, t.cols, f)?,
    };
    w.image("phantom", &x)
}

fn run_simulate(cfg: &ExperimentConfig, t: &SimulateTask, w: &mut Writer) -> Result<()> {
    let x = read_image(cfg.resolve(&t.image))?;
    let (rows, cols, frames) = t.operator.image_dims();
    if x.dims() != (rows, cols, frames) {
        return Err(Error::shape(format!("image is {:?}, operator expects {:?}", x.dims(), (rows, cols, frames))));
    }
    let op = t.operator.build()?;
    let mut m = match (t.noise, &t.operator) {
        (Noise::Poisson { i0 }, OperatorSpec::Ct(g)) => simulate_ct(&x, g, i0, cfg.seed())?,
        (Noise::Poisson { .. }, _) => return Err(Error::config("Poisson noise needs a CT operator")),
        (Noise::Gaussian { sigma }, _) => simulate_gaussian(&x, op.as_ref(), sigma, cfg.seed())?,
        (Noise::None, _) => simulate_gaussian(&x, op.as_ref(), 0.0, 0)?,
    };
    m.operator_tag = t.operator.tag().to_string();
    let file = MeasurementFile { operator: t.operator.clone(), measurements: m };
    file.save(w.path("measurements.json"))
}

fn training_patches(cfg: &ExperimentConfig, images: &[PathBuf], patch: &PatchConfig) -> Result<Array2<f64>> {
    if images.is_empty() {
        return Err(missing("learning", "images"));
    }
    let mats = images
        .iter()
        .map(|p| extract_patches(&read_image(cfg.resolve(p))?, patch))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| Error::shape(e.to_string()))
}

fn run_learn(cfg: &ExperimentConfig, t: &LearnTask, w: &mut Writer) -> Result<()> {
    let x = training_patches(cfg, &t.images, &t.patch)?;
    let gamma = || t.gamma.ok_or_else(|| missing("learning", "gamma"));
    let objective = match t.method {
        LearnMethod::Transform => {
            let fit = learn_transform(x.view(), gamma()?, t.iters, cfg.seed())?;
            fit.transform.save(w.path("model.stm"))?;
            fit.objective
        }
        LearnMethod::Ultra => {
            let fit = learn_ultra(x.view(), t.k.unwrap_or(2), gamma()?, t.iters, cfg.seed())?;
            fit.model.save(w.path("model.stm"))?;
            fit.objective
        }
        LearnMethod::Dict => {
            let atoms = t.atoms.ok_or_else(|| missing("dictionary learning", "atoms"))?;
            let fit = learn_dictionary_soup(x.view(), gamma()?, atoms, t.iters, cfg.seed())?;
            fit.dictionary.save(w.path("model.stm"))?;
            fit.objective
        }
        LearnMethod::Multilayer => {
            let gammas = t.gammas.clone().ok_or_else(|| missing("multi-layer learning", "gammas"))?;
            let depth = t.depth.unwrap_or(gammas.len());
            let fit = learn_multilayer(x.view(), depth, &gammas, t.iters)?;
            fit.model.save(w.path("model.stm"))?;
            fit.objective
        }
    };
    w.text("objective.csv", &series_csv("step,objective", &objective))
}

struct Loaded {
    spec: OperatorSpec,
    op: Arc<dyn LinearOperator>,
    m: Measurements,
}

fn load_measurements(cfg: &ExperimentConfig, path: &Path) -> Result<Loaded> {
    let file = MeasurementFile::load(cfg.resolve(path))?;
    let op = file.operator.build()?;
    if op.out_dim() != file.measurements.len() {
        return Err(Error::shape(format!(
            "{} measurements for an operator with {} outputs",
            file.measurements.len(),
            op.out_dim()
        )));
    }
    Ok(Loaded { spec: file.operator, op, m: file.measurements })
}

fn initial_image(cfg: &ExperimentConfig, init: Option<&str>, l: &Loaded) -> Result<Image> {
    let (rows, cols, frames) = l.spec.image_dims();
    let default = if matches!(l.spec, OperatorSpec::Ct(_)) { "fbp" } else { "adjoint" };
    match init.unwrap_or(default) {
        "fbp" => match &l.spec {
            OperatorSpec::Ct(g) => fbp(&l.m.y, g),
            _ => Err(Error::config("fbp initialisation needs a CT operator")),
        },
        "adjoint" => Image::new(rows, cols, frames, l.op.adjoint(&l.m.y)?),
        "zero" => Ok(Image::zeros_stack(rows, cols, frames)),
        path => {
            let x = read_image(cfg.resolve(Path::new(path)))?;
            if x.dims() != (rows, cols, frames) {
                return Err(Error::shape("initial image does not match the operator"));
            }
            Ok(x)
        }
    }
}

fn build_denoiser(cfg: &ExperimentConfig, spec: &DenoiserSpec) -> Result<Denoiser> {
    Ok(match spec {
        DenoiserSpec::Identity => Denoiser::Identity,
        DenoiserSpec::Median => Denoiser::Median3,
        DenoiserSpec::TransformThreshold { model, patch, gamma } => Denoiser::TransformThreshold {
            transform: Transform::load(cfg.resolve(model))?,
            patch: *patch,
            gamma: *gamma,
        },
        DenoiserSpec::Convnet { path } => Denoiser::ConvNet(load_convnet(&cfg.resolve(path))?),
    })
}

fn load_convnet(path: &Path) -> Result<ConvNetParams> {
    let p: ConvNetParams = serde_json::from_slice(&std::fs::read(path)?)?;
    ConvNetParams::from_flat(p.channels, &p.to_flat())
}

struct ReconResult {
    x: Image,
    iterations: usize,
    trace: Option<String>,
}

fn run_recon(cfg: &ExperimentConfig, t: &ReconTask, w: &mut Writer) -> Result<()> {
    let name = t.method.name();
    if t.method == ReconMethod::Hankel {
        return run_hankel(t, w);
    }
    let path = t.measurements.as_ref().ok_or_else(|| missing(name, "measurements"))?;
    let l = load_measurements(cfg, path)?;
    let start = Instant::now();
    let out = match t.method {
        ReconMethod::Fbp => {
            let OperatorSpec::Ct(g) = &l.spec else {
                return Err(Error::config("fbp needs CT measurements"));
            };
            ReconResult { x: fbp(&l.m.y, g)?, iterations: 0, trace: None }
        }
        ReconMethod::Fista => {
            let p = t.fista.as_ref().ok_or_else(|| missing(name, "fista"))?;
            let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
            let wt: Box<dyn LinearOperator> = match p.sparsifier {
                Sparsifier::Identity => Box::new(Identity::new(x0.len())),
                Sparsifier::Haar => {
                    if x0.frames() != 1 || x0.rows() % 2 != 0 || x0.cols() % 2 != 0 {
                        return Err(Error::config("the Haar sparsifier needs one frame with even dimensions"));
                    }
                    Box::new(Haar2::new(x0.rows(), x0.cols()))
                }
            };
            let o = fista_analysis_l1(&l.m, l.op.as_ref(), wt.as_ref(), p.beta, p.iters, &x0)?;
            ReconResult { x: o.x, iterations: p.iters, trace: Some(trace_csv(&o.trace)) }
        }
        ReconMethod::PwlsEp => {
            let p = t.edge.as_ref().ok_or_else(|| missing(name, "edge"))?;
            let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
            let rc = EdgeRegConfig { beta: p.beta, delta: p.delta };
            let o = pwls_ep(&l.m, l.op.as_ref(), &rc, p.iters, &x0)?;
            ReconResult { x: o.x, iterations: p.iters, trace: Some(trace_csv(&o.trace)) }
        }
        ReconMethod::PwlsUltra => {
            let model_path = t.model.as_ref().ok_or_else(|| missing(name, "model"))?;
            let rc = t.ultra.as_ref().ok_or_else(|| missing(name, "ultra"))?;
            let model = UnionTransformModel::load(cfg.resolve(model_path))?;
            let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
            let o = recon_pwls_ultra(&l.m, l.op.as_ref(), &model, rc, &x0)?;
            ReconResult { x: o.x, iterations: rc.outer_iters, trace: Some(trace_csv(&o.trace)) }
        }
        ReconMethod::Dict => {
            let model_path = t.model.as_ref().ok_or_else(|| missing(name, "model"))?;
            let rc = t.ultra.as_ref().ok_or_else(|| missing(name, "ultra"))?;
            let d = Dictionary::load(cfg.resolve(model_path))?;
            let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
            let o = recon_dictionary(&l.m, l.op.as_ref(), &d, rc, &x0)?;
            ReconResult { x: o.x, iterations: rc.outer_iters, trace: Some(trace_csv(&o.trace)) }
        }
        ReconMethod::Pnp => {
            let p = t.pnp.as_ref().ok_or_else(|| missing(name, "pnp"))?;
            let den = build_denoiser(cfg, &p.denoiser)?;
            let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
            let o = pnp_hqs(&l.m, l.op.as_ref(), &den, &p.schedule, p.iters, &x0, &p.cg)?;
            ReconResult { x: o.x, iterations: p.iters, trace: Some(series_csv("iter,relative_change", &o.changes)) }
        }
        ReconMethod::Lps => {
            let p = t.lps.as_ref().ok_or_else(|| missing(name, "lps"))?;
            let o = lps_reconstruct(&l.m, l.op.as_ref(), l.spec.image_dims(), None, p)?;
            w.image("low_rank", &o.low_rank)?;
            w.image("sparse", &o.sparse)?;
            let sum: Vec<f64> = o.low_rank.as_slice().iter().zip(o.sparse.as_slice()).map(|(a, b)| a + b).collect();
            ReconResult { x: o.low_rank.with_data(sum)?, iterations: p.iters, trace: Some(trace_csv(&o.trace)) }
        }
        ReconMethod::Hankel => unreachable!("handled above"),
    };
    let runtime = start.elapsed().as_secs_f64();
    w.image("recon", &out.x)?;
    if cfg.trace {
        if let Some(tr) = &out.trace {
            w.text("trace.csv", tr)?;
        }
    }
    if let Some(r) = &t.reference {
        let reference = read_image(cfg.resolve(r))?;
        let row = metrics_row(name, &out.x, &reference, t.peak, cfg.timing.then_some(runtime), out.iterations)?;
        w.text("metrics.csv", &metrics_csv(&[row]))?;
    }
    Ok(())
}

fn run_hankel(t: &ReconTask, w: &mut Writer) -> Result<()> {
    let p = t.hankel.as_ref().ok_or_else(|| missing("hankel", "hankel"))?;
    if p.re.len() != p.config.n || p.im.len() != p.config.n {
        return Err(Error::shape(format!("hankel signal must have n = {} entries", p.config.n)));
    }
    let x_hat: Vec<Complex64> = p.re.iter().zip(&p.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let o = hankel_complete(&x_hat, &p.config)?;
    let mut s = String::from("index,re,im\n");
    for (i, v) in o.m.iter().enumerate() {
        let _ = writeln!(s, "{i},{:e},{:e}", v.re, v.im);
    }
    w.text("signal.csv", &s)?;
    w.text("trace.csv", &trace_csv(&o.trace))
}

fn metrics_row(
    name: &str,
    x: &Image,
    reference: &Image,
    peak: f64,
    runtime: Option<f64>,
    iterations: usize,
) -> Result<MetricsRow> {
    Ok(MetricsRow {
        name: name.to_string(),
        psnr: psnr(x, reference, peak)?,
        rmse: rmse(x, reference)?,
        runtime_seconds: runtime,
        iterations,
    })
}

fn run_train(cfg: &ExperimentConfig, t: &TrainTask, w: &mut Writer) -> Result<()> {
    let pairs = t
        .pairs
        .iter()
        .map(|p| Ok((read_image(cfg.resolve(&p.input))?, read_image(cfg.resolve(&p.target))?)))
        .collect::<Result<Vec<_>>>()?;
    let dc = DenoiserTrainConfig { seed: cfg.seed(), ..t.denoiser.clone() };
    let fit = train_denoiser(&pairs, &dc)?;
    std::fs::write(w.path("denoiser.json"), serde_json::to_vec(&fit.params)?)?;
    w.text("loss.csv", &series_csv("epoch,loss", &fit.epoch_loss))
}

fn run_super_train(cfg: &ExperimentConfig, t: &SuperTrainTask, w: &mut Writer) -> Result<()> {
    let mut supervised = Vec::with_capacity(t.supervised.len());
    let mut first: Option<Loaded> = None;
    for s in &t.supervised {
        let l = load_measurements(cfg, &s.measurements)?;
        if let Some(f) = &first {
            if f.spec != l.spec {
                return Err(Error::config("all supervised measurements must share one operator"));
            }
        }
        supervised.push((read_image(cfg.resolve(&s.reference))?, l.m.clone()));
        first.get_or_insert(l);
    }
    let Some(l) = first else {
        return Err(missing("super-train", "supervised"));
    };
    let unsupervised = t.unsupervised.iter().map(|p| read_image(cfg.resolve(p))).collect::<Result<Vec<_>>>()?;
    let set = TrainSet { supervised, unsupervised };
    let seed = cfg.seed();
    let sc = SuperTrainConfig { seed, denoiser: DenoiserTrainConfig { seed, ..t.config.denoiser.clone() }, ..t.config.clone() };
    let init = |m: &Measurements| initial_image(cfg, None, &Loaded { spec: l.spec.clone(), op: l.op.clone(), m: m.clone() });
    let out = super_train(&set, l.op.as_ref(), &init, &sc)?;
    out.model.save(w.path("model.stm"))?;
    w.text("layers.csv", &out.report_csv())
}

fn run_super_recon(cfg: &ExperimentConfig, t: &SuperReconTask, w: &mut Writer) -> Result<()> {
    let l = load_measurements(cfg, &t.measurements)?;
    let model = SuperModel::load(cfg.resolve(&t.model))?;
    let x0 = initial_image(cfg, t.init.as_deref(), &l)?;
    let start = Instant::now();
    let out = super_reconstruct(&l.m, l.op.as_ref(), &model, &x0)?;
    let runtime = start.elapsed().as_secs_f64();
    w.image("recon", &out.x)?;
    if cfg.trace {
        let mut s = String::from("layer,iter,cost,data_term,reg_term\n");
        for (k, tr) in out.traces.iter().enumerate() {
            for r in &tr.rows {
                let _ = writeln!(s, "{},{},{:e},{:e},{:e}", k + 1, r.iter, r.cost, r.data_term, r.reg_term);
            }
        }
        w.text("trace.csv", &s)?;
    }
    if let Some(r) = &t.reference {
        let reference = read_image(cfg.resolve(r))?;
        let mut rows = Vec::new();
        for (k, x) in out.layers.iter().enumerate() {
            let last = k + 1 == out.layers.len();
            let rt = (cfg.timing && last).then_some(runtime);
            rows.push(metrics_row(&format!("super-layer-{}", k + 1), x, &reference, t.peak, rt, (k + 1) * model.recon.outer_iters)?);
        }
        w.text("metrics.csv", &metrics_csv(&rows))?;
    }
    Ok(())
}

fn run_metrics(cfg: &ExperimentConfig, t: &MetricsTask, w: &mut Writer) -> Result<()> {
    let reference = read_image(cfg.resolve(&t.reference))?;
    let rows = t
        .images
        .iter()
        .map(|n| metrics_row(&n.name, &read_image(cfg.resolve(&n.path))?, &reference, t.peak, None, 0))
        .collect::<Result<Vec<_>>>()?;
    w.text("metrics.csv", &metrics_csv(&rows))
}
