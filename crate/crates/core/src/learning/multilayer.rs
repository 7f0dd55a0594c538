//! Multi-layer transforms: each layer sparsifies the transform-domain
//! residual of the layer above, `R_{l+1} = Omega_l R_l - Z_l`.

use super::transform::{hard_threshold_matrix, procrustes_update, Transform};
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLayerModel {
    pub layers: Vec<Transform>,
    pub gammas: Vec<f64>,
}

impl MultiLayerModel {
    pub fn new(layers: Vec<Transform>, gammas: Vec<f64>) -> Result<Self> {
        if layers.is_empty() || layers.len() != gammas.len() {
            return Err(Error::config("need one gamma per layer and at least one layer"));
        }
        let n = layers[0].dim();
        if layers.iter().any(|t| t.dim() != n || !t.unitary) {
            return Err(Error::config("all layers must be unitary with equal size"));
        }
        Ok(MultiLayerModel { layers, gammas })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Clone, Debug)]
pub struct MultiLayerFit {
    pub model: MultiLayerModel,
    pub codes: Vec<Array2<f64>>,
    /// `R_1 .. R_{L+1}`.
    pub residuals: Vec<Array2<f64>>,
    pub objective: Vec<f64>,
}

impl MultiLayerFit {
    /// `||Omega_l R_l - Z_l||_F^2` for each layer.
    pub fn layer_residual_energy(&self) -> Vec<f64> {
        self.residuals[1..].iter().map(|r| r.iter().map(|v| v * v).sum()).collect()
    }
}

fn objective(layers: &[Transform], gammas: &[f64], codes: &[Array2<f64>], residuals: &[Array2<f64>]) -> f64 {
    (0..layers.len())
        .map(|l| {
            let fit: f64 = residuals[l + 1].iter().map(|v| v * v).sum();
            let nnz = codes[l].iter().filter(|&&v| v != 0.0).count() as f64;
            fit + gammas[l] * gammas[l] * nnz
        })
        .sum()
}

/// Recomputes `R_{l+1}, ..` from layer `from` down with the codes fixed.
fn propagate(layers: &[Transform], codes: &[Array2<f64>], residuals: &mut [Array2<f64>], from: usize) {
    for l in from..layers.len() {
        residuals[l + 1] = layers[l].apply(residuals[l].view()) - &codes[l];
    }
}

/// Block coordinate descent over the layers, all starting at the DCT.
///
/// Per layer: Procrustes update of `Omega_l`, then `Z_l <- H(Omega_l R_l)`,
/// with downstream residuals recomputed after each. Both steps are exact for
/// the layer's own term but move the residuals seen by later layers, so an
/// update of a non-final layer that raises the total objective is undone.
pub fn learn_multilayer(x: ArrayView2<f64>, depth: usize, gammas: &[f64], iters: usize) -> Result<MultiLayerFit> {
    if depth == 0 || gammas.len() != depth {
        return Err(Error::config(format!("{} gammas given for {depth} layers", gammas.len())));
    }
    if gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::config("gammas must be nonnegative"));
    }
    let n = x.nrows();
    let mut layers = vec![Transform::dct(n); depth];
    let mut residuals = vec![x.to_owned()];
    let mut codes = Vec::with_capacity(depth);
    for l in 0..depth {
        let c = layers[l].apply(residuals[l].view());
        let z = hard_threshold_matrix(&c, gammas[l]);
        residuals.push(c - &z);
        codes.push(z);
    }
    let mut trace = vec![objective(&layers, gammas, &codes, &residuals)];
    let mut current = trace[0];
    for _ in 0..iters {
        for l in 0..depth {
            let last = l + 1 == depth;

            let saved = (layers[l].clone(), residuals.clone());
            layers[l] = procrustes_update(residuals[l].view(), codes[l].view(), &layers[l])?;
            propagate(&layers, &codes, &mut residuals, l);
            let after = objective(&layers, gammas, &codes, &residuals);
            if !last && after > current {
                layers[l] = saved.0;
                residuals = saved.1;
            } else {
                current = after;
            }

            let saved = (codes[l].clone(), residuals.clone());
            codes[l] = hard_threshold_matrix(&layers[l].apply(residuals[l].view()), gammas[l]);
            propagate(&layers, &codes, &mut residuals, l);
            let after = objective(&layers, gammas, &codes, &residuals);
            if !last && after > current {
                codes[l] = saved.0;
                residuals = saved.1;
            } else {
                current = after;
            }
        }
        trace.push(current);
    }
    Ok(MultiLayerFit {
        model: MultiLayerModel::new(layers, gammas.to_vec())?,
        codes,
        residuals,
        objective: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::transform::learn_transform;
    use crate::ops::rng::{normal_vec, seeded};

    fn data(n: usize, s: usize, seed: u64) -> Array2<f64> {
        Array2::from_shape_vec((n, s), normal_vec(&mut seeded(seed), n * s)).unwrap()
    }

    #[test]
    fn one_layer_matches_single_transform() {
        let x = data(9, 80, 1);
        let ml = learn_multilayer(x.view(), 1, &[0.6], 5).unwrap();
        let t = learn_transform(x.view(), 0.6, 5, 0).unwrap();
        assert_eq!(ml.model.layers[0], t.transform);
        assert_eq!(ml.codes[0], t.codes);
    }

    #[test]
    fn zero_thresholds_leave_no_residual() {
        let x = data(4, 30, 2);
        let ml = learn_multilayer(x.view(), 3, &[0.0, 0.0, 0.0], 1).unwrap();
        assert!(ml.residuals[1..].iter().all(|r| r.iter().all(|&v| v == 0.0)));
        assert_eq!(*ml.objective.last().unwrap(), 0.0);
    }

    #[test]
    fn recursion_holds_and_objective_decreases() {
        let x = data(16, 200, 3);
        let ml = learn_multilayer(x.view(), 3, &[1.2, 0.8, 0.5], 8).unwrap();
        for l in 0..3 {
            let want = ml.model.layers[l].apply(ml.residuals[l].view()) - &ml.codes[l];
            assert_eq!(ml.residuals[l + 1], want);
        }
        for w in ml.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        let e = ml.layer_residual_energy();
        assert!(e[1] <= e[0] && e[2] <= e[1]);
    }

    #[test]
    fn gamma_count_must_match() {
        assert!(matches!(learn_multilayer(data(4, 10, 1).view(), 2, &[0.1], 1), Err(Error::Config(_))));
    }
}
