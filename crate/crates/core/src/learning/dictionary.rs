//! Synthesis dictionary learning by sum-of-outer-products block coordinate
//! descent: atoms and code rows are updated one at a time in index order.

use crate::error::{Error, Result};
use crate::ops::rng::{normal_vec, seeded};
use crate::ops::threshold::hard;
use ndarray::{Array1, Array2, ArrayView2, Axis};

#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    /// `m x J`, unit-norm columns.
    pub atoms: Array2<f64>,
}

impl Dictionary {
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        for (j, col) in atoms.axis_iter(Axis(1)).enumerate() {
            let nrm = col.dot(&col).sqrt();
            if (nrm - 1.0).abs() > 1e-10 {
                return Err(Error::value(format!("atom {j} has norm {nrm}")));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Seeded Gaussian columns scaled to unit norm.
    pub fn random(m: usize, j: usize, seed: u64) -> Self {
        let mut atoms = Array2::from_shape_vec((m, j), normal_vec(&mut seeded(seed), m * j)).unwrap();
        for mut col in atoms.axis_iter_mut(Axis(1)) {
            let nrm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / nrm);
        }
        Dictionary { atoms }
    }

    pub fn patch_len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn size(&self) -> usize {
        self.atoms.ncols()
    }
}

/// `||X - D Z||_F^2 + lambda^2 ||Z||_0`.
pub fn dictionary_objective(x: ArrayView2<f64>, d: &Dictionary, z: &Array2<f64>, lambda: f64) -> f64 {
    let r = &x - &d.atoms.dot(z);
    let nnz = z.iter().filter(|&&v| v != 0.0).count() as f64;
    r.iter().map(|v| v * v).sum::<f64>() + lambda * lambda * nnz
}

/// Per-column thresholds: one value for every patch, or one per patch.
pub(crate) fn column_lambda(lambdas: &[f64], i: usize) -> f64 {
    if lambdas.len() == 1 {
        lambdas[0]
    } else {
        lambdas[i]
    }
}

pub(crate) fn residual_objective(resid: &Array2<f64>, z: &Array2<f64>, lambdas: &[f64]) -> f64 {
    let mut penalty = 0.0;
    for (i, col) in z.columns().into_iter().enumerate() {
        let l = column_lambda(lambdas, i);
        penalty += l * l * col.iter().filter(|&&v| v != 0.0).count() as f64;
    }
    resid.iter().map(|v| v * v).sum::<f64>() + penalty
}

/// One sequential pass over the atoms. `resid` must equal `X - D Z` on
/// entry and is kept in sync. `lambdas` holds one threshold or one per
/// column. With `update_atoms = false` only the code rows move (the coding
/// step used during reconstruction).
pub(crate) fn soup_pass(
    atoms: &mut Array2<f64>,
    z: &mut Array2<f64>,
    resid: &mut Array2<f64>,
    lambdas: &[f64],
    update_atoms: bool,
    mut record: Option<&mut Vec<f64>>,
) {
    let (m, j_count) = atoms.dim();
    let s = z.ncols();
    for j in 0..j_count {
        // E = resid + d_j z_j^T
        let d: Array1<f64> = atoms.column(j).to_owned();
        let zj: Array1<f64> = z.row(j).to_owned();
        let mut e = resid.clone();
        for i in 0..s {
            if zj[i] != 0.0 {
                for r in 0..m {
                    e[[r, i]] += d[r] * zj[i];
                }
            }
        }
        let mut new_z: Array1<f64> = e.t().dot(&d);
        for (i, v) in new_z.iter_mut().enumerate() {
            *v = hard(*v, column_lambda(lambdas, i));
        }
        let mut new_d = d.clone();
        if update_atoms && new_z.iter().any(|&v| v != 0.0) {
            let ez = e.dot(&new_z);
            let nrm = ez.dot(&ez).sqrt();
            if nrm > 0.0 {
                new_d = ez / nrm;
            }
        }
        for i in 0..s {
            for r in 0..m {
                e[[r, i]] -= new_d[r] * new_z[i];
            }
        }
        *resid = e;
        atoms.column_mut(j).assign(&new_d);
        z.row_mut(j).assign(&new_z);
        if let Some(trace) = record.as_deref_mut() {
            trace.push(residual_objective(resid, z, lambdas));
        }
    }
}

#[derive(Clone, Debug)]
pub struct DictionaryFit {
    pub dictionary: Dictionary,
    pub codes: Array2<f64>,
    /// Objective at start and after every atom update.
    pub objective: Vec<f64>,
}

/// Learns `J` unit-norm atoms from zero codes and a seeded random dictionary.
/// A single global `lambda` is used for every patch.
pub fn learn_dictionary_soup(
    x: ArrayView2<f64>,
    lambda: f64,
    j: usize,
    iters: usize,
    seed: u64,
) -> Result<DictionaryFit> {
    if j == 0 {
        return Err(Error::config("atom count must be at least 1"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::config("lambda must be nonnegative"));
    }
    let (m, s) = x.dim();
    let mut atoms = Dictionary::random(m, j, seed).atoms;
    let mut z = Array2::zeros((j, s));
    let mut resid = x.to_owned();
    let mut objective = vec![residual_objective(&resid, &z, &[lambda])];
    for _ in 0..iters {
        soup_pass(&mut atoms, &mut z, &mut resid, &[lambda], true, Some(&mut objective));
    }
    Ok(DictionaryFit {
        dictionary: Dictionary { atoms },
        codes: z,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(m: usize, s: usize, seed: u64) -> Array2<f64> {
        Array2::from_shape_vec((m, s), normal_vec(&mut seeded(seed), m * s)).unwrap()
    }

    fn unit_atoms(d: &Dictionary) -> bool {
        d.atoms.axis_iter(Axis(1)).all(|c| (c.dot(&c).sqrt() - 1.0).abs() <= 1e-10)
    }

    #[test]
    fn huge_lambda_keeps_initialisation() {
        let x = data(6, 20, 1);
        let fit = learn_dictionary_soup(x.view(), 1e6, 4, 3, 7).unwrap();
        assert!(fit.codes.iter().all(|&v| v == 0.0));
        assert_eq!(fit.dictionary, Dictionary::random(6, 4, 7));
    }

    #[test]
    fn repeated_column_is_a_rank_one_fit() {
        let c = Array1::from(vec![1.0, -2.0, 0.5, 3.0]);
        let x = Array2::from_shape_fn((4, 12), |(r, _)| c[r]);
        let fit = learn_dictionary_soup(x.view(), 0.01, 1, 5, 3).unwrap();
        let d = fit.dictionary.atoms.column(0).to_owned();
        let cn = &c / c.dot(&c).sqrt();
        assert!((d.dot(&cn).abs() - 1.0).abs() < 1e-12);
        let rec = fit.dictionary.atoms.dot(&fit.codes);
        assert!((&rec - &x).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn full_dictionary_without_sparsity_represents_data() {
        let x = data(5, 40, 2);
        let fit = learn_dictionary_soup(x.view(), 0.0, 5, 400, 4).unwrap();
        let err = dictionary_objective(x.view(), &fit.dictionary, &fit.codes, 0.0).sqrt();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn every_atom_update_lowers_the_objective() {
        let x = data(8, 60, 5);
        let fit = learn_dictionary_soup(x.view(), 0.7, 10, 6, 2).unwrap();
        assert_eq!(fit.objective.len(), 1 + 60);
        for w in fit.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        assert!(unit_atoms(&fit.dictionary));
        let direct = dictionary_objective(x.view(), &fit.dictionary, &fit.codes, 0.7);
        assert!((direct - fit.objective.last().unwrap()).abs() < 1e-9 * direct);
    }
}
