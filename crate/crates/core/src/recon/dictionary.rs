use super::config::{weighted_coverage, ReconConfig};
use crate::classical::{CostTrace, SolveOutcome};
use crate::error::{ensure_len, Error, Result};
use crate::forward::Measurements;
use crate::learning::dictionary::{residual_objective, soup_pass};
use crate::learning::Dictionary;
use crate::ops::operator::symmetric;
use crate::ops::{cg_solve, Image, LinearOperator, PatchGrid};
use ndarray::Array2;

const CODING_PASSES: usize = 2;

/// Minimises `||Ax - y||_W^2 + beta sum_j tau_j (||P_j x - D z_j||^2 +
/// gamma_j^2 ||z_j||_0)` with `D` fixed. Each outer iteration runs two
/// sequential coding passes from the previous codes (zero at the start),
/// then solves for the image. Missing weights mean `W = I`.
pub fn recon_dictionary(
    y: &Measurements,
    a: &dyn LinearOperator,
    d: &Dictionary,
    cfg: &ReconConfig,
    x0: &Image,
) -> Result<SolveOutcome> {
    ensure_len("image for the forward operator", x0.len(), a.in_dim())?;
    ensure_len("measurements for the forward operator", y.len(), a.out_dim())?;
    let grid = PatchGrid::for_image(x0, cfg.patch)?;
    if d.patch_len() != grid.patch_len() {
        return Err(Error::shape(format!(
            "dictionary atoms have length {}, patches have {}",
            d.patch_len(),
            grid.patch_len()
        )));
    }
    let (gammas, tau) = cfg.patch_params(&grid)?;
    let w = y.weights_or_ones();
    let beta = cfg.beta;
    let diag: Vec<f64> = weighted_coverage(&grid, &tau).iter().map(|c| beta * c).collect();
    let m = a.out_dim();
    let normal = symmetric(x0.len(), |v: &[f64], out: &mut [f64]| {
        let mut av = vec![0.0; m];
        a.apply_into(v, &mut av);
        av.iter_mut().zip(&w).for_each(|(p, wi)| *p *= wi);
        a.adjoint_into(&av, out);
        for ((o, dg), vi) in out.iter_mut().zip(&diag).zip(v) {
            *o += dg * vi;
        }
    });
    let wy: Vec<f64> = y.y.iter().zip(&w).map(|(p, q)| p * q).collect();
    let b_data = a.adjoint(&wy)?;

    let reg_of = |resid: &Array2<f64>, z: &Array2<f64>| -> f64 {
        let mut total = 0.0;
        for j in 0..z.ncols() {
            if tau[j] != 0.0 {
                let r = resid.column(j).to_owned().insert_axis(ndarray::Axis(1));
                let zj = z.column(j).to_owned().insert_axis(ndarray::Axis(1));
                total += tau[j] * residual_objective(&r, &zj, &gammas[j..=j]);
            }
        }
        beta * total
    };
    let data_of = |x: &[f64]| -> Result<f64> {
        let ax = a.apply(x)?;
        Ok(ax.iter().zip(&y.y).zip(&w).map(|((p, q), wi)| wi * (p - q) * (p - q)).sum())
    };

    let mut atoms = d.atoms.clone();
    let mut z = Array2::zeros((d.size(), grid.count()));
    let mut x = x0.as_slice().to_vec();
    let mut resid = grid.extract(&x);
    let mut trace = CostTrace::new();
    trace.push(0, data_of(&x)?, reg_of(&resid, &z));
    for it in 1..=cfg.outer_iters {
        for _ in 0..CODING_PASSES {
            soup_pass(&mut atoms, &mut z, &mut resid, &gammas, false, None);
        }
        let mut rhs = b_data.clone();
        if beta != 0.0 {
            let dz = d.atoms.dot(&z);
            let mut weighted = dz;
            for (j, mut col) in weighted.columns_mut().into_iter().enumerate() {
                col *= tau[j];
            }
            rhs.iter_mut().zip(grid.adjoint(&weighted)?).for_each(|(r, v)| *r += beta * v);
        }
        x = cg_solve(&normal, &rhs, &cfg.cg, &x)?.x;
        resid = grid.extract(&x) - d.atoms.dot(&z);
        trace.push(it, data_of(&x)?, reg_of(&resid, &z));
    }
    Ok(SolveOutcome { x: x0.with_data(x)?, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::operator::Identity;
    use crate::ops::rng::{normal_vec, seeded};
    use crate::ops::PatchConfig;

    fn cfg(beta: f64, gamma: f64) -> ReconConfig {
        ReconConfig { patch: PatchConfig::square(3, 1), outer_iters: 6, ..ReconConfig::new(beta, gamma) }
    }

    #[test]
    fn beta_zero_is_least_squares() {
        let v = normal_vec(&mut seeded(1), 64);
        let y = Measurements::plain(v.clone()).unwrap();
        let d = Dictionary::random(9, 12, 2);
        let out = recon_dictionary(&y, &Identity::new(64), &d, &cfg(0.0, 0.1), &Image::zeros(8, 8)).unwrap();
        assert!(out.x.as_slice().iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-8));
    }

    #[test]
    fn cost_is_monotone() {
        for seed in 0..3 {
            let v = normal_vec(&mut seeded(seed), 64);
            let y = Measurements::plain(v).unwrap();
            let d = Dictionary::random(9, 12, seed + 5);
            let out = recon_dictionary(&y, &Identity::new(64), &d, &cfg(0.7, 0.4), &Image::zeros(8, 8)).unwrap();
            assert!(out.trace.is_nonincreasing(1e-6), "{:?}", out.trace.costs());
        }
    }
}
