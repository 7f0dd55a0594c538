//! Dense linear algebra, thresholding kernels, patch machinery and the
//! linear-operator abstraction shared by every solver.

pub mod bases;
pub mod cg;
pub mod image;
pub mod operator;
pub mod patches;
pub mod rng;
pub mod svd;
pub mod threshold;
pub mod vecops;

pub use cg::{cg_solve, CgConfig, CgOutcome};
pub use image::Image;
pub use operator::{dot_test, DenseOperator, Field, Identity, LinearOperator};
pub use patches::{assemble_patches, extract_patches, Boundary, PatchConfig, PatchGrid};
pub use svd::{svd, SvdResult};
pub use threshold::{hard_threshold, soft_threshold};
