//! Imaging forward models and measurement simulation.

pub mod blur;
pub mod dft;
pub mod measurements;
pub mod radon;

pub use blur::CircularBlur;
pub use dft::{build_masked_dft, build_masked_dft_real, FourierMask, MaskedDft};
pub use measurements::{simulate_ct, simulate_ct_noiseless, simulate_gaussian, Measurements, OperatorSpec};
pub use radon::{build_radon, fbp, CtGeometry, Radon};
