//! Raw stencil kernels over flat component-major slices.
//!
//! The same kernels serve the Dirichlet grid (missing neighbours read as zero)
//! and its periodic extension (neighbours wrap around), so the dispersion
//! checks exercise exactly the code used by the solvers.

use crate::num::Real;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Lattice<T> {
    pub n: [usize; 3],
    pub h: [T; 3],
    pub periodic: bool,
}

impl<T: Real> Lattice<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    fn strides(&self) -> [usize; 3] {
        [1, self.n[0], self.n[0] * self.n[1]]
    }

    /// Value at `idx + e_axis` (zero or wrapped past the last node).
    #[inline(always)]
    fn plus(&self, u: &[T], idx: usize, c: usize, axis: usize, stride: usize) -> T {
        if c + 1 < self.n[axis] {
            u[idx + stride]
        } else if self.periodic {
            u[idx + stride - self.n[axis] * stride]
        } else {
            T::zero()
        }
    }

    /// Value at `idx - e_axis` (zero or wrapped before the first node).
    #[inline(always)]
    fn minus(&self, u: &[T], idx: usize, c: usize, axis: usize, stride: usize) -> T {
        if c > 0 {
            u[idx - stride]
        } else if self.periodic {
            u[idx + (self.n[axis] - 1) * stride]
        } else {
            T::zero()
        }
    }

    /// `out = beta * out + scale * (-Δ_h u)` for one scalar component.
    pub fn neg_laplacian(&self, u: &[T], out: &mut [T], scale: T, beta: T) {
        let st = self.strides();
        let w = self.h.map(|h| scale / (h * h));
        let two = T::lit(2.0);
        let mut idx = 0;
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    let c = [i, j, k];
                    let center = u[idx];
                    let mut acc = T::zero();
                    for a in 0..3 {
                        let s = self.plus(u, idx, c[a], a, st[a]) + self.minus(u, idx, c[a], a, st[a]);
                        acc += w[a] * (two * center - s);
                    }
                    out[idx] = if beta == T::zero() { acc } else { beta * out[idx] + acc };
                    idx += 1;
                }
            }
        }
    }

    /// Central-difference divergence `D_h u` of a 3-component field.
    pub fn divergence(&self, u: &[T], out: &mut [T]) {
        let n = self.len();
        let st = self.strides();
        let w = self.h.map(|h| T::lit(0.5) / h);
        let mut idx = 0;
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    let c = [i, j, k];
                    let mut acc = T::zero();
                    for a in 0..3 {
                        let comp = &u[a * n..(a + 1) * n];
                        acc += w[a] * (self.plus(comp, idx, c[a], a, st[a]) - self.minus(comp, idx, c[a], a, st[a]));
                    }
                    out[idx] = acc;
                    idx += 1;
                }
            }
        }
    }

    /// `out = beta * out + scale * D_hᵀ s`, the exact transpose of [`Self::divergence`].
    pub fn divergence_adjoint(&self, s: &[T], out: &mut [T], scale: T, beta: T) {
        let n = self.len();
        let st = self.strides();
        let w = self.h.map(|h| scale * T::lit(0.5) / h);
        for a in 0..3 {
            let comp = &mut out[a * n..(a + 1) * n];
            let mut idx = 0;
            for k in 0..self.n[2] {
                for j in 0..self.n[1] {
                    for i in 0..self.n[0] {
                        let c = [i, j, k][a];
                        let v = w[a] * (self.minus(s, idx, c, a, st[a]) - self.plus(s, idx, c, a, st[a]));
                        comp[idx] = if beta == T::zero() { v } else { beta * comp[idx] + v };
                        idx += 1;
                    }
                }
            }
        }
    }

    /// `Σ_edges (∂⁺u)(∂⁺v)` over all forward-difference edges of one component,
    /// including the edges touching the boundary (unweighted by cell volume).
    pub fn forward_grad_dot(&self, u: &[T], v: &[T]) -> T {
        let st = self.strides();
        let mut total = T::zero();
        for a in 0..3 {
            let inv_h2 = (self.h[a] * self.h[a]).recip();
            let mut acc = T::zero();
            let mut idx = 0;
            for k in 0..self.n[2] {
                for j in 0..self.n[1] {
                    for i in 0..self.n[0] {
                        let c = [i, j, k][a];
                        // edge from this node to its + neighbour
                        let du = self.plus(u, idx, c, a, st[a]) - u[idx];
                        let dv = self.plus(v, idx, c, a, st[a]) - v[idx];
                        acc += du * dv;
                        // the boundary edge entering the first node
                        if c == 0 && !self.periodic {
                            acc += u[idx] * v[idx];
                        }
                        idx += 1;
                    }
                }
            }
            total += acc * inv_h2;
        }
        total
    }
}
