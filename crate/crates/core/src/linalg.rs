//! Matrix-free Krylov and eigenvalue routines on plain slices.
//!
//! All routines use the unweighted Euclidean product. For operators that are
//! symmetric in the cell-volume weighted product this is the same up to a
//! constant factor, which cancels in every quantity computed here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::num::{axpy, dot, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `‖r‖ / ‖rhs‖` (or `‖r‖` when the right-hand side vanishes).
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CgError {
    #[error("conjugate gradient stalled after {iterations} iterations at relative residual {relative_residual:e}")]
    NotConverged { iterations: usize, relative_residual: f64 },
    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },
}

impl From<CgError> for Error {
    fn from(e: CgError) -> Self {
        Error::SolverFailure(e.to_string())
    }
}

/// Solves `A x = rhs` for symmetric positive definite `A`, starting from the
/// contents of `x`.
pub fn conjugate_gradient<T: Real>(
    mut apply: impl FnMut(&[T], &mut [T]),
    rhs: &[T],
    x: &mut [T],
    rtol: T,
    max_iter: usize,
) -> Result<CgStats, CgError> {
    let n = rhs.len();
    assert_eq!(x.len(), n, "solution and right-hand side lengths differ");
    let mut r = vec![T::zero(); n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let rhs_norm = dot(rhs, rhs).sqrt();
    let scale = if rhs_norm > T::zero() { rhs_norm } else { T::one() };
    let target = rtol * scale;
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(CgStats { iterations: 0, relative_residual: (rr.sqrt() / scale).as_f64() });
    }
    let mut p = r.clone();
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > T::zero()) {
            return Err(CgError::Indefinite { iteration: it, curvature: curvature.as_f64() });
        }
        let step = rr / curvature;
        axpy(step, &p, x);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(CgStats { iterations: it, relative_residual: (rr_new.sqrt() / scale).as_f64() });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(CgError::NotConverged { iterations: max_iter, relative_residual: (rr.sqrt() / scale).as_f64() })
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration from a seeded random start. Returns the final Rayleigh quotient.
pub fn power_iteration<T: Real>(
    mut apply: impl FnMut(&[T], &mut [T]),
    n: usize,
    seed: u64,
    rtol: T,
    max_iter: usize,
) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let mut y = vec![T::zero(); n];
    normalize(&mut x);
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        apply(&x, &mut y);
        let next = dot(&x, &y);
        std::mem::swap(&mut x, &mut y);
        if normalize(&mut x) == T::zero() {
            return T::zero();
        }
        if (next - lambda).abs() <= rtol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn normalize<T: Real>(x: &mut [T]) -> T {
    let nrm = dot(x, x).sqrt();
    if nrm > T::zero() {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 2.0 * x[i] - l - r;
        }
    }

    #[test]
    fn cg_solves_tridiagonal_system() {
        let n = 40;
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; n];
        let stats = conjugate_gradient(tridiag, &rhs, &mut x, 1e-12, 200).unwrap();
        assert!(stats.iterations <= n + 1);
        let mut ax = vec![0.0; n];
        tridiag(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - rhs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_zero_rhs_returns_immediately() {
        let mut x = vec![0.0; 5];
        let stats = conjugate_gradient(tridiag, &[0.0; 5], &mut x, 1e-10, 10).unwrap();
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let neg = |x: &[f64], y: &mut [f64]| {
            for (a, b) in y.iter_mut().zip(x) {
                *a = -*b;
            }
        };
        let err = conjugate_gradient(neg, &[1.0, 2.0], &mut [0.0, 0.0], 1e-10, 10).unwrap_err();
        assert!(matches!(err, CgError::Indefinite { .. }));
    }

    #[test]
    fn power_iteration_finds_tridiagonal_top_eigenvalue() {
        let n = 10;
        let exact = 2.0 - 2.0 * (10.0 * std::f64::consts::PI / 11.0).cos();
        let est = power_iteration(tridiag, n, 7, 1e-14, 20_000);
        assert!((est - exact).abs() < 1e-8, "{est} vs {exact}");
    }
}
