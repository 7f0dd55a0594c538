use crate::error::{Error, Result};
use crate::ops::{CgConfig, PatchConfig, PatchGrid};
use serde::{Deserialize, Serialize};

fn default_outer() -> usize {
    20
}

fn default_patch() -> PatchConfig {
    PatchConfig::square(8, 1)
}

/// Settings shared by the learned-prior reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub beta: f64,
    pub gamma: f64,
    /// Overrides `gamma` patch by patch.
    #[serde(default)]
    pub gamma_per_patch: Option<Vec<f64>>,
    /// Patch weights `tau_j`; all ones when absent.
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
    #[serde(default = "default_outer")]
    pub outer_iters: usize,
    #[serde(default)]
    pub cg: CgConfig,
    #[serde(default = "default_patch")]
    pub patch: PatchConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ReconConfig {
    pub fn new(beta: f64, gamma: f64) -> Self {
        ReconConfig {
            beta,
            gamma,
            gamma_per_patch: None,
            tau: None,
            outer_iters: default_outer(),
            cg: CgConfig::default(),
            patch: default_patch(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::config("beta and gamma must be nonnegative"));
        }
        let bad = |v: &Option<Vec<f64>>| v.as_ref().is_some_and(|v| v.iter().any(|g| !(*g >= 0.0)));
        if bad(&self.gamma_per_patch) {
            return Err(Error::config("per-patch gamma must be nonnegative"));
        }
        if bad(&self.tau) {
            return Err(Error::config("patch weights must be nonnegative"));
        }
        Ok(())
    }

    /// Per-patch thresholds and weights, checked against the patch count.
    pub(crate) fn patch_params(&self, grid: &PatchGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let s = grid.count();
        let expand = |v: &Option<Vec<f64>>, fill: f64, what: &str| match v {
            Some(v) if v.len() != s => Err(Error::shape(format!("{what} has {} entries for {s} patches", v.len()))),
            Some(v) => Ok(v.clone()),
            None => Ok(vec![fill; s]),
        };
        Ok((expand(&self.gamma_per_patch, self.gamma, "gamma_per_patch")?, expand(&self.tau, 1.0, "tau")?))
    }
}

/// Diagonal of `sum_j tau_j P_j^T P_j`.
pub(crate) fn weighted_coverage(grid: &PatchGrid, tau: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.image_len()];
    for (j, &t) in tau.iter().enumerate() {
        for &i in grid.indices(j) {
            out[i as usize] += t;
        }
    }
    out
}
