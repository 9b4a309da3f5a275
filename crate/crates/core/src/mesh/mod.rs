//! Discrete box domain with homogeneous Dirichlet boundary.
//!
//! Interior nodes sit at `x = (i+1) h` for `i in 0..n` along each axis, so the
//! boundary planes `x = 0` and `x = L` carry the (never stored) zero values.
//! Nodes are ordered x fastest, then y, then z. Vector fields are stored
//! component-major: all of `u1`, then all of `u2`, then all of `u3`.
//!
//! The discrete L² product uses the cell volume `h1 h2 h3` as the quadrature
//! weight at every node, which keeps the difference operators exactly
//! symmetric in that product.

pub mod io;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid<T> {
    lengths: [T; 3],
    n: [usize; 3],
    h: [T; 3],
}

impl<T: Real> Grid<T> {
    pub fn new(lengths: [T; 3], n: [usize; 3]) -> Result<Self> {
        for axis in 0..3 {
            if !(lengths[axis] > T::zero()) || !lengths[axis].is_finite() {
                return Err(Error::invalid(format!(
                    "length along axis {axis} must be positive and finite, got {}",
                    lengths[axis]
                )));
            }
            if n[axis] == 0 {
                return Err(Error::invalid(format!("resolution along axis {axis} must be >= 1")));
            }
        }
        let h = [0, 1, 2].map(|a| lengths[a] / T::from_usize_lossy(n[a] + 1));
        Ok(Self { lengths, n, h })
    }

    pub fn lengths(&self) -> [T; 3] {
        self.lengths
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn spacing(&self) -> [T; 3] {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Quadrature weight of every node.
    pub fn cell_volume(&self) -> T {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Discrete measure `|Ω_h| = n1 n2 n3 h1 h2 h3` (the integral of 1 under the quadrature).
    pub fn discrete_volume(&self) -> T {
        T::from_usize_lossy(self.node_count()) * self.cell_volume()
    }

    pub fn volume(&self) -> T {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        debug_assert!(ijk[0] < self.n[0] && ijk[1] < self.n[1] && ijk[2] < self.n[2]);
        ijk[0] + self.n[0] * (ijk[1] + self.n[1] * ijk[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let rest = idx / self.n[0];
        [i, rest % self.n[1], rest / self.n[1]]
    }

    /// Physical position of an interior node.
    #[inline]
    pub fn position(&self, idx: usize) -> [T; 3] {
        let c = self.coords(idx);
        [0, 1, 2].map(|a| T::from_usize_lossy(c[a] + 1) * self.h[a])
    }

    /// Wavevector `(m1 π/L1, m2 π/L2, m3 π/L3)` of a Dirichlet box mode.
    pub fn box_wavevector(&self, m: [usize; 3]) -> [T; 3] {
        [0, 1, 2].map(|a| T::from_usize_lossy(m[a]) * T::PI() / self.lengths[a])
    }

    /// Eigenvalue of `-Δ_h` on the box mode with wavevector `k`:
    /// `Σ (4/h²) sin²(k h / 2)`.
    pub fn laplacian_symbol(&self, k: [T; 3]) -> T {
        let two = T::lit(2.0);
        (0..3)
            .map(|a| {
                let s = (k[a] * self.h[a] / two).sin();
                T::lit(4.0) * s * s / (self.h[a] * self.h[a])
            })
            .sum()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "n = {:?}, L = {:?} vs n = {:?}, L = {:?}",
                self.n, self.lengths, other.n, other.lengths
            )))
        }
    }
}

/// Convenience constructor mirroring [`Grid::new`].
pub fn build_grid<T: Real>(lengths: [T; 3], n: [usize; 3]) -> Result<Grid<T>> {
    Grid::new(lengths, n)
}

/// Three-component field sampled at the interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: Grid<T>,
    data: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { grid: *grid, data: vec![T::zero(); 3 * grid.node_count()] }
    }

    /// Wraps component-major data; rejects wrong lengths and non-finite entries.
    pub fn from_data(grid: &Grid<T>, data: Vec<T>) -> Result<Self> {
        if data.len() != 3 * grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "expected {} entries, got {}",
                3 * grid.node_count(),
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow("field contains non-finite entries".into()));
        }
        Ok(Self { grid: *grid, data })
    }

    /// Samples `f(position)` at every interior node.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut([T; 3]) -> [T; 3]) -> Self {
        let n = grid.node_count();
        let mut data = vec![T::zero(); 3 * n];
        for idx in 0..n {
            let value = f(grid.position(idx));
            for c in 0..3 {
                data[c * n + idx] = value[c];
            }
        }
        Self { grid: *grid, data }
    }

    /// Independent uniform entries in `[-amplitude, amplitude]`.
    pub fn random<R: Rng + ?Sized>(grid: &Grid<T>, amplitude: T, rng: &mut R) -> Self {
        let data = (0..3 * grid.node_count())
            .map(|_| amplitude * T::lit(rng.gen_range(-1.0..=1.0)))
            .collect();
        Self { grid: *grid, data }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[T] {
        let n = self.grid.node_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.grid.node_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Value of the field at one node as a 3-vector.
    #[inline]
    pub fn at(&self, idx: usize) -> [T; 3] {
        let n = self.grid.node_count();
        [self.data[idx], self.data[n + idx], self.data[2 * n + idx]]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&x| a * x).collect() }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        crate::num::axpy(a, &other.data, &mut self.data);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(T::one(), other)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// Scalar field on the interior nodes (e.g. a discrete divergence).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid<T>,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { grid: *grid, data: vec![T::zero(); grid.node_count()] }
    }

    pub fn from_data(grid: &Grid<T>, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "expected {} entries, got {}",
                grid.node_count(),
                data.len()
            )));
        }
        Ok(Self { grid: *grid, data })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Discrete L² norm squared with cell-volume weights.
    pub fn norm_sq(&self) -> T {
        crate::num::dot(&self.data, &self.data) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// Discrete `(L²)³` product `Σ_i Σ_nodes a_i b_i h1 h2 h3`.
pub fn inner_l2<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> Result<T> {
    a.grid.check_same(&b.grid)?;
    Ok(crate::num::dot(&a.data, &b.data) * a.grid.cell_volume())
}

/// Discrete `‖a‖_p = (Σ_i Σ_nodes |a_i|^p h1 h2 h3)^{1/p}` for `p >= 1`.
pub fn norm_lp<T: Real>(a: &VectorField<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::invalid(format!("L^p norm needs p >= 1, got {p}")));
    }
    let cv = a.grid.cell_volume();
    if p == T::lit(2.0) {
        return Ok((crate::num::dot(&a.data, &a.data) * cv).sqrt());
    }
    let scale = a.max_abs();
    if scale == T::zero() {
        return Ok(T::zero());
    }
    // scaled to avoid overflow of |a|^p for large p
    let sum: T = a.data.iter().map(|&x| (x.abs() / scale).powf(p)).sum();
    Ok(scale * (sum * cv).powf(p.recip()))
}

/// Dirichlet box mode `u_i(x) = amp d_i sin(k1 x1) sin(k2 x2) sin(k3 x3)`.
///
/// `k` must be `(m1 π/L1, m2 π/L2, m3 π/L3)` with integers `m_i >= 1`, and `d` a unit vector.
pub fn plane_wave<T: Real>(grid: &Grid<T>, k: [T; 3], d: [T; 3], amp: T) -> Result<VectorField<T>> {
    let tol = T::epsilon().sqrt() * T::lit(10.0);
    let dn = crate::num::norm3(d);
    if (dn - T::one()).abs() > tol {
        return Err(Error::invalid(format!("polarization must be a unit vector, |d| = {dn}")));
    }
    for a in 0..3 {
        let m = k[a] * grid.lengths[a] / T::PI();
        if !(m.round() >= T::one()) || (m - m.round()).abs() > tol * m.abs().max(T::one()) {
            return Err(Error::invalid(format!(
                "wavevector component {a} = {} is not a Dirichlet box mode (m = {m})",
                k[a]
            )));
        }
    }
    Ok(VectorField::from_fn(grid, |x| {
        let s = (k[0] * x[0]).sin() * (k[1] * x[1]).sin() * (k[2] * x[2]).sin();
        [amp * d[0] * s, amp * d[1] * s, amp * d[2] * s]
    }))
}

/// Box mode addressed by its integer mode numbers.
pub fn box_mode<T: Real>(grid: &Grid<T>, m: [usize; 3], d: [T; 3], amp: T) -> Result<VectorField<T>> {
    plane_wave(grid, grid.box_wavevector(m), d, amp)
}

/// Random combination of the box modes with `1 <= m_a <= max_mode` (capped by
/// the resolution), each with a random polarization and a coefficient uniform
/// in `[-1, 1]` divided by `|m|²`. Smooth, so suited as initial data.
pub fn random_low_mode_field<T: Real, R: Rng + ?Sized>(grid: &Grid<T>, max_mode: usize, rng: &mut R) -> VectorField<T> {
    let n = grid.node_count();
    let mut data = vec![T::zero(); 3 * n];
    let top = [0, 1, 2].map(|a| max_mode.max(1).min(grid.n[a]));
    let mut sines = [vec![], vec![], vec![]];
    for m0 in 1..=top[0] {
        for m1 in 1..=top[1] {
            for m2 in 1..=top[2] {
                let m = [m0, m1, m2];
                let k = grid.box_wavevector(m);
                let weight = T::lit(rng.gen_range(-1.0..=1.0)) / T::from_usize_lossy(m0 * m0 + m1 * m1 + m2 * m2);
                let d = [0; 3].map(|_| T::lit(rng.gen_range(-1.0..=1.0)));
                for a in 0..3 {
                    sines[a] = (0..grid.n[a])
                        .map(|i| (k[a] * T::from_usize_lossy(i + 1) * grid.h[a]).sin())
                        .collect();
                }
                for idx in 0..n {
                    let c = grid.coords(idx);
                    let s = weight * sines[0][c[0]] * sines[1][c[1]] * sines[2][c[2]];
                    for comp in 0..3 {
                        data[comp * n + idx] += d[comp] * s;
                    }
                }
            }
        }
    }
    VectorField { grid: *grid, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> Grid<f64> {
        Grid::new([1.0; 3], [n; 3]).unwrap()
    }

    #[test]
    fn grid_spacing_and_counts() {
        let g = unit(3);
        assert_eq!(g.spacing(), [0.25; 3]);
        assert_eq!(g.node_count(), 27);

        let g = unit(1);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.position(0), [0.5; 3]);

        let g = Grid::new([2.0, 1.0, 1.0], [7, 3, 3]).unwrap();
        assert_eq!(g.spacing(), [0.25; 3]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::new([0.0, 1.0, 1.0], [3; 3]), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new([1.0, -1.0, 1.0], [3; 3]), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new([1.0; 3], [3, 0, 3]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ordering_is_x_fastest() {
        let g = Grid::new([1.0; 3], [2, 3, 4]).unwrap();
        assert_eq!(g.index([1, 0, 0]), 1);
        assert_eq!(g.index([0, 1, 0]), 2);
        assert_eq!(g.index([0, 0, 1]), 6);
        for idx in 0..g.node_count() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn constant_field_quadrature() {
        let g = unit(3);
        let one = VectorField::from_fn(&g, |_| [1.0; 3]);
        assert_relative_eq!(inner_l2(&one, &one).unwrap(), 1.265625, max_relative = 1e-15);
        let expected = (3.0 * 27.0 * 0.25f64.powi(3)).powf(0.25);
        assert_relative_eq!(norm_lp(&one, 4.0).unwrap(), expected, max_relative = 1e-14);
        let zero = VectorField::zeros(&g);
        assert_eq!(inner_l2(&zero, &zero).unwrap(), 0.0);
        assert_eq!(norm_lp(&zero, 3.5).unwrap(), 0.0);
    }

    #[test]
    fn lp_rejects_small_p_and_mismatched_grids() {
        let g = unit(3);
        let a = VectorField::zeros(&g);
        assert!(norm_lp(&a, 0.5).is_err());
        let b = VectorField::zeros(&unit(4));
        assert!(matches!(inner_l2(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn fundamental_mode_shape() {
        let g = unit(3);
        let u = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 1.0).unwrap();
        assert!(u.component(1).iter().all(|&x| x == 0.0));
        assert!(u.component(2).iter().all(|&x| x == 0.0));
        // boundary-adjacent node (0,0,0) sits at h and is nonzero
        let s = (std::f64::consts::PI * 0.25).sin();
        assert_relative_eq!(u.component(0)[0], s * s * s, max_relative = 1e-14);
        assert!(u.component(0).iter().all(|&x| x > 0.0));
    }

    #[test]
    fn plane_wave_validates_inputs() {
        let g = unit(3);
        let k = g.box_wavevector([1, 1, 1]);
        assert!(plane_wave(&g, k, [1.0, 1.0, 0.0], 1.0).is_err());
        assert!(plane_wave(&g, [1.0, k[1], k[2]], [1.0, 0.0, 0.0], 1.0).is_err());
        assert!(plane_wave(&g, [0.0, k[1], k[2]], [1.0, 0.0, 0.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_consistency_and_bilinearity(seed in any::<u64>(), alpha in -3.0f64..3.0) {
            let g = Grid::<f64>::new([1.0, 2.0, 0.5], [4, 3, 5]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = VectorField::random(&g, 1.0, &mut rng);
            let b = VectorField::random(&g, 1.0, &mut rng);
            let c = VectorField::random(&g, 1.0, &mut rng);
            let n2 = norm_lp(&a, 2.0).unwrap();
            let ip = inner_l2(&a, &a).unwrap();
            prop_assert!((n2 * n2 - ip).abs() <= 1e-14 * ip);

            let mut lhs_field = a.scaled(alpha);
            lhs_field.axpy(1.0, &b).unwrap();
            let lhs = inner_l2(&lhs_field, &c).unwrap();
            let rhs = alpha * inner_l2(&a, &c).unwrap() + inner_l2(&b, &c).unwrap();
            let scale = (alpha.abs() + 1.0) * norm_lp(&a, 2.0).unwrap().max(norm_lp(&b, 2.0).unwrap()) * norm_lp(&c, 2.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
            prop_assert!((inner_l2(&a, &b).unwrap() - inner_l2(&b, &a).unwrap()).abs() <= 1e-15 * scale);
        }
    }
}
