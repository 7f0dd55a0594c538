//! Model-based image reconstruction with learned sparse models.
//!
//! The crate is organised bottom-up:
//!
//! * [`ops`]: images, matrix-free operators, thresholding, patches, SVD, CG.
//! * [`forward`]: CT (parallel-beam Radon), masked Fourier and blur operators,
//!   noise simulation and filtered backprojection.
//! * [`classical`]: FISTA with an analysis l1 prior, edge-preserving PWLS,
//!   low-rank plus sparse, Hankel spectrum completion.
//! * [`learning`]: transform, union-of-transforms, multi-layer transform and
//!   dictionary learning from patches, plus the binary model file.
//! * [`recon`]: reconstruction with learned priors and plug-and-play HQS.
//! * [`supervised`]: a small residual CNN with hand-written backprop and the
//!   layered supervised/unsupervised reconstruction built on it.
//! * [`io`]: phantoms, image files, metrics, experiment configs and the task
//!   runner used by the `mbirlab` binary.
//!
//! The `book/` directory next to the workspace walks through each piece; its
//! code listings are compiled and run as doc-tests of this crate.

pub mod classical;
pub mod error;
pub mod forward;
pub mod io;
pub mod learning;
pub mod ops;
pub mod parallel;
pub mod recon;
pub mod supervised;

pub use error::{Error, Result};
pub use ops::Image;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/sparse_models.md")]
    mod sparse_models {}
    #[doc = include_str!("../../../book/src/learned_recon.md")]
    mod learned_recon {}
    #[doc = include_str!("../../../book/src/layered.md")]
    mod layered {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
