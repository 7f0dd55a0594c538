//! Classical (non-learned) model-based solvers.

pub mod fista;
pub mod hankel;
pub mod lps;
pub mod pwls_ep;
pub mod svt;
pub mod trace;

pub use fista::{fista_analysis_l1, SolveOutcome};
pub use hankel::{build_hankel, hankel_complete, HankelConfig, HankelOutcome};
pub use lps::{lps_reconstruct, LpsConfig, LpsOutcome};
pub use pwls_ep::{pwls_ep, pwls_ep_cost, pwls_ep_gradient, EdgeRegConfig};
pub use svt::{nuclear_norm, svt};
pub use trace::{CostTrace, TraceRow};
