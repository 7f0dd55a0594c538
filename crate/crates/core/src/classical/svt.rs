//! Singular value thresholding, the proximal map of `tau ||.||_*`.

use crate::error::{Error, Result};
use crate::ops::svd::{svd, Scalar};
use ndarray::{Array2, ArrayView2};

pub fn svt<T: Scalar>(m: ArrayView2<T>, tau: f64) -> Result<Array2<T>> {
    if !(tau >= 0.0) {
        return Err(Error::value("threshold must be nonnegative"));
    }
    Ok(svd(m)?.reconstruct_with(|s| (s - tau).max(0.0)))
}

pub fn nuclear_norm<T: Scalar>(m: ArrayView2<T>) -> Result<f64> {
    Ok(svd(m)?.s.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::rng::{normal_vec, seeded};
    use ndarray::array;

    #[test]
    fn diagonal_example() {
        let z = svt(array![[3.0, 0.0], [0.0, 1.0]].view(), 2.0).unwrap();
        let want = array![[1.0, 0.0], [0.0, 0.0]];
        assert!((&z - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_threshold_is_identity() {
        let m = Array2::from_shape_vec((4, 3), normal_vec(&mut seeded(1), 12)).unwrap();
        let z = svt(m.view(), 0.0).unwrap();
        assert!((&z - &m).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn singular_values_are_shrunk() {
        let m = Array2::from_shape_vec((5, 4), normal_vec(&mut seeded(2), 20)).unwrap();
        let s = svd(m.view()).unwrap().s;
        let zs = svd(svt(m.view(), 0.8).unwrap().view()).unwrap().s;
        for (a, b) in s.iter().zip(&zs) {
            assert!(((a - 0.8).max(0.0) - b).abs() < 1e-8);
        }
    }
}
