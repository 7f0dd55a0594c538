//! Supervised denoising networks and their combination with PWLS-ULTRA.

pub mod cnn;
pub mod layered;
pub mod train;

pub use cnn::{cnn_backward, cnn_forward, ConvNetParams, WeightInit};
pub use layered::{
    super_fixed_point_residual, super_reconstruct, super_train, LayerReport, SuperModel, SuperOutcome, SuperTrainConfig,
    SuperTraining, TrainSet,
};
pub use train::{denoiser_mse, train_denoiser, DenoiserTrainConfig, TrainedDenoiser};
