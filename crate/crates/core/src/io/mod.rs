//! Files, phantoms, metrics and the experiment runner.

pub mod experiment;
pub mod image_file;
pub mod metrics;
pub mod model_file;
pub mod phantom;

pub use experiment::{run_experiment, ExperimentConfig, MeasurementFile, RunReport, Task};
pub use image_file::{read_image, write_image, write_pgm};
pub use metrics::{metrics_csv, psnr, rmse, MetricsRow};
pub use model_file::{ModelCodec, ModelKind};
pub use phantom::{dynamic_phantom, phantom_variant, shepp_logan};
