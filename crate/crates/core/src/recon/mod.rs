//! Reconstruction with learned priors.

pub mod config;
pub mod dictionary;
pub mod pnp;
pub mod ultra;

pub use config::ReconConfig;
pub use dictionary::recon_dictionary;
pub use pnp::{hqs_data_step, pnp_hqs, Denoiser, HqsSchedule, PnpOutcome};
pub use ultra::{recon_pwls_transform, recon_pwls_ultra, recon_pwls_ultra_coupled, Coupling, UltraReconOutcome};
