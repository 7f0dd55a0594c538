//! Matrix-free linear operators.
//!
//! Operators act on flat `f64` buffers. A complex operator stores each complex
//! entry as an interleaved `(re, im)` pair, so `in_dim`/`out_dim` always count
//! real slots and the real inner product of two buffers is the real part of
//! the complex one. Under that convention the adjoint of a complex-linear map
//! is its Hermitian transpose.

use super::rng::{normal_vec, seeded};
use super::vecops::{dot, norm};
use crate::error::{ensure_len, Error, Result};
use ndarray::Array2;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    fn field(&self) -> Field {
        Field::Real
    }

    /// `out = A x`. Buffers have the operator's dimensions.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^H y`.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("operator input", x.len(), self.in_dim())?;
        let mut out = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_len("adjoint input", y.len(), self.out_dim())?;
        let mut out = vec![0.0; self.in_dim()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Arc<T> {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn field(&self) -> Field {
        (**self).field()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn field(&self) -> Field {
        (**self).field()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Identity {
    pub dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Identity { dim }
    }
}

impl LinearOperator for Identity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// Explicit real matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: Array2<f64>,
}

impl DenseOperator {
    pub fn new(matrix: Array2<f64>) -> Self {
        DenseOperator { matrix }
    }
}

impl LinearOperator for DenseOperator {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.matrix.rows().into_iter().enumerate() {
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, row) in self.matrix.rows().into_iter().enumerate() {
            let yi = y[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }
}

/// Operator defined by a pair of closures.
pub struct FnOperator<F, G> {
    in_dim: usize,
    out_dim: usize,
    field: Field,
    forward: F,
    backward: G,
}

impl<F, G> FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(in_dim: usize, out_dim: usize, forward: F, backward: G) -> Self {
        FnOperator {
            in_dim,
            out_dim,
            field: Field::Real,
            forward,
            backward,
        }
    }

    pub fn with_field(mut self, field: Field) -> Self {
        self.field = field;
        self
    }
}

impl<F, G> LinearOperator for FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn field(&self) -> Field {
        self.field
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (self.forward)(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (self.backward)(y, out)
    }
}

/// Self-adjoint operator from a single closure (normal equations etc).
pub fn symmetric<F>(dim: usize, f: F) -> impl LinearOperator
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + Clone,
{
    let g = f.clone();
    FnOperator::new(dim, dim, f, g)
}

/// `outer ∘ inner`.
pub struct Composite<A, B> {
    pub outer: A,
    pub inner: B,
}

impl<A: LinearOperator, B: LinearOperator> Composite<A, B> {
    pub fn new(outer: A, inner: B) -> Result<Self> {
        if outer.in_dim() != inner.out_dim() {
            return Err(Error::shape(format!(
                "cannot compose: outer takes {}, inner yields {}",
                outer.in_dim(),
                inner.out_dim()
            )));
        }
        Ok(Composite { outer, inner })
    }
}

impl<A: LinearOperator, B: LinearOperator> LinearOperator for Composite<A, B> {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.outer.out_dim()
    }
    fn field(&self) -> Field {
        if self.outer.field() == Field::Complex || self.inner.field() == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.inner.out_dim()];
        self.inner.apply_into(x, &mut mid);
        self.outer.apply_into(&mid, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.outer.in_dim()];
        self.outer.adjoint_into(y, &mut mid);
        self.inner.adjoint_into(&mid, out);
    }
}

/// Embeds a real vector into interleaved complex storage; the adjoint keeps
/// the real part.
#[derive(Clone, Copy, Debug)]
pub struct RealToComplex {
    pub dim: usize,
}

impl LinearOperator for RealToComplex {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        2 * self.dim
    }
    fn field(&self) -> Field {
        Field::Complex
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, &v) in x.iter().enumerate() {
            out[2 * i] = v;
            out[2 * i + 1] = 0.0;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = y[2 * i];
        }
    }
}

/// Maximum normalised adjoint defect over `trials` seeded probe pairs:
/// `|<Ax,y> - <x,A^H y>| / (|Ax||y| + |x||A^H y|)`.
pub fn dot_test(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let x = normal_vec(&mut rng, op.in_dim());
        let y = normal_vec(&mut rng, op.out_dim());
        let mut ax = vec![0.0; op.out_dim()];
        let mut aty = vec![0.0; op.in_dim()];
        op.apply_into(&x, &mut ax);
        op.adjoint_into(&y, &mut aty);
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&aty);
        let defect = if scale > 0.0 { (lhs - rhs).abs() / scale } else { (lhs - rhs).abs() };
        worst = worst.max(defect);
    }
    worst
}

/// Relative superposition defect `|A(ax+by) - aAx - bAy| / (|a||Ax| + |b||Ay|)`.
pub fn linearity_defect(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let x = normal_vec(&mut rng, op.in_dim());
        let y = normal_vec(&mut rng, op.in_dim());
        let ab = normal_vec(&mut rng, 2);
        let (a, b) = (ab[0], ab[1]);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let ac = op.apply(&combo).expect("dims");
        let ax = op.apply(&x).expect("dims");
        let ay = op.apply(&y).expect("dims");
        let diff: Vec<f64> = (0..ac.len()).map(|i| ac[i] - a * ax[i] - b * ay[i]).collect();
        let scale = a.abs() * norm(&ax) + b.abs() * norm(&ay);
        if scale > 0.0 {
            worst = worst.max(norm(&diff) / scale);
        }
    }
    worst
}

/// Power-iteration estimate of `||A||^2` (largest eigenvalue of `A^H A`).
pub fn op_norm_sq(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut v = normal_vec(&mut rng, op.in_dim());
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut av = vec![0.0; op.out_dim()];
    let mut w = vec![0.0; op.in_dim()];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        op.apply_into(&v, &mut av);
        op.adjoint_into(&av, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        estimate = nw;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    estimate
}

pub const POWER_ITERS: usize = 50;

/// Step size `0.95 / ||A||^2` used by the proximal-gradient solvers.
pub fn safe_step(op: &dyn LinearOperator, seed: u64) -> f64 {
    let l = op_norm_sq(op, POWER_ITERS, seed);
    if l > 0.0 {
        0.95 / l
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_passes_through() {
        let id = Identity::new(3);
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(dot_test(&id, 5, 1) < 1e-15);
    }

    #[test]
    fn zero_in_zero_out() {
        let op = DenseOperator::new(array![[1.0, -2.0], [0.5, 4.0], [3.0, 1.0]]);
        assert_eq!(op.apply(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn shape_error_on_bad_input() {
        let id = Identity::new(3);
        assert!(matches!(id.apply(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn corrupted_adjoint_is_caught() {
        // 2x2 explicit matrix with the adjoint doubled.
        let m = array![[2.0, 1.0], [-1.0, 3.0]];
        let good = DenseOperator::new(m.clone());
        let bad = FnOperator::new(
            2,
            2,
            {
                let g = good.clone();
                move |x: &[f64], o: &mut [f64]| g.apply_into(x, o)
            },
            {
                let g = good.clone();
                move |y: &[f64], o: &mut [f64]| {
                    g.adjoint_into(y, o);
                    o.iter_mut().for_each(|v| *v *= 2.0);
                }
            },
        );
        assert!(dot_test(&good, 10, 3) < 1e-14);
        let defect = dot_test(&bad, 10, 3);
        // |<Ax,y> - 2<Ax,y>| / (|Ax||y| + 2|x||A^T y|) peaks at 1/3 for aligned probes.
        assert!(defect > 0.1 && defect <= 1.0 / 3.0 + 1e-12, "defect {defect}");
    }

    #[test]
    fn power_iteration_matches_largest_singular_value() {
        let op = DenseOperator::new(array![[3.0, 0.0], [0.0, 1.0]]);
        assert!((op_norm_sq(&op, 50, 0) - 9.0).abs() < 1e-10);
    }

    #[test]
    fn embedding_is_adjoint_consistent() {
        let e = RealToComplex { dim: 7 };
        assert!(dot_test(&e, 10, 2) < 1e-14);
    }
}
