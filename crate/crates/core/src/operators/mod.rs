//! Discrete Lamé operator `𝓔_ε u = -μ Δ_h u + ε D_hᵀ D_h u` and the energy
//! products built from it.
//!
//! `D_h` is the central-difference divergence with zero ghost values and
//! `D_hᵀ` its exact transpose, so the grad-div block is symmetric positive
//! semidefinite by construction. The gradient used in [`elastic_inner`] is the
//! forward difference over every edge of the grid, including the edges that
//! touch the boundary; its transpose composition is the 7-point Laplacian,
//! which makes `⟨𝓔_ε u, v⟩ = ⟨u, v⟩ₑ` hold to rounding.

mod dispersion;
pub(crate) mod stencil;

pub use dispersion::{
    dirichlet_mode_check, dispersion_speeds, periodic_mode_check, ModeCheck, PeriodicLattice, Polarization,
    WaveSpeeds,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::power_iteration;
use crate::mesh::{Grid, ScalarField, VectorField};
use crate::num::Real;
use stencil::Lattice;

/// Material and damping parameters. `eps = lambda + mu` is the stored
/// coupling; `lambda` is derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LameParams<T> {
    mu: T,
    eps: T,
    alpha: T,
    rho: T,
}

impl<T: Real> LameParams<T> {
    pub fn new(mu: T, lambda: T, alpha: T, rho: T) -> Result<Self> {
        Self::from_eps(mu, lambda + mu, alpha, rho)
    }

    pub fn from_eps(mu: T, eps: T, alpha: T, rho: T) -> Result<Self> {
        for (name, v) in [("mu", mu), ("alpha", alpha), ("rho", rho)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::invalid(format!("lambda + mu must be nonnegative, got {eps}")));
        }
        Ok(Self { mu, eps, alpha, rho })
    }

    /// Same material with a different coupling `eps`.
    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::from_eps(self.mu, eps, self.alpha, self.rho)
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn lambda(&self) -> T {
        self.eps - self.mu
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn rho(&self) -> T {
        self.rho
    }
}

pub(crate) fn lattice<T: Real>(grid: &Grid<T>) -> Lattice<T> {
    Lattice { n: grid.n(), h: grid.spacing(), periodic: false }
}

/// Matrix-free `𝓔_ε` bound to one grid, for repeated application on raw
/// component-major slices.
#[derive(Clone, Copy, Debug)]
pub struct LameOperator<T> {
    grid: Grid<T>,
    lat: Lattice<T>,
    mu: T,
    eps: T,
}

impl<T: Real> LameOperator<T> {
    pub fn new(params: &LameParams<T>, grid: &Grid<T>) -> Self {
        Self { grid: *grid, lat: lattice(grid), mu: params.mu, eps: params.eps }
    }

    pub(crate) fn from_lattice(lat: Lattice<T>, grid: Grid<T>, mu: T, eps: T) -> Self {
        Self { grid, lat, mu, eps }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        3 * self.lat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out = 𝓔_ε u` on component-major slices of length `3N`.
    pub fn apply_into(&self, u: &[T], out: &mut [T]) {
        let n = self.lat.len();
        assert_eq!(u.len(), 3 * n);
        assert_eq!(out.len(), 3 * n);
        for c in 0..3 {
            self.lat.neg_laplacian(&u[c * n..(c + 1) * n], &mut out[c * n..(c + 1) * n], self.mu, T::zero());
        }
        if self.eps != T::zero() {
            let mut div = vec![T::zero(); n];
            self.lat.divergence(u, &mut div);
            self.lat.divergence_adjoint(&div, out, self.eps, T::one());
        }
    }

    pub fn apply(&self, u: &VectorField<T>) -> Result<VectorField<T>> {
        self.grid.check_same(u.grid())?;
        let mut out = VectorField::zeros(&self.grid);
        self.apply_into(u.as_slice(), out.as_mut_slice());
        Ok(out)
    }
}

/// Componentwise 7-point Laplacian `Δ_h u` (negative semidefinite).
pub fn apply_laplacian<T: Real>(grid: &Grid<T>, u: &VectorField<T>) -> Result<VectorField<T>> {
    grid.check_same(u.grid())?;
    let lat = lattice(grid);
    let mut out = VectorField::zeros(grid);
    for c in 0..3 {
        lat.neg_laplacian(u.component(c), out.component_mut(c), -T::one(), T::zero());
    }
    Ok(out)
}

/// Central-difference divergence `D_h u`.
pub fn apply_divergence<T: Real>(grid: &Grid<T>, u: &VectorField<T>) -> Result<ScalarField<T>> {
    grid.check_same(u.grid())?;
    let mut out = ScalarField::zeros(grid);
    lattice(grid).divergence(u.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// `D_hᵀ s`, the transpose of [`apply_divergence`] in the discrete L² product.
pub fn apply_divergence_adjoint<T: Real>(grid: &Grid<T>, s: &ScalarField<T>) -> Result<VectorField<T>> {
    grid.check_same(s.grid())?;
    let mut out = VectorField::zeros(grid);
    lattice(grid).divergence_adjoint(s.as_slice(), out.as_mut_slice(), T::one(), T::zero());
    Ok(out)
}

/// `D_hᵀ D_h u`, the discrete `-∇ div u`.
pub fn apply_grad_div<T: Real>(grid: &Grid<T>, u: &VectorField<T>) -> Result<VectorField<T>> {
    let div = apply_divergence(grid, u)?;
    apply_divergence_adjoint(grid, &div)
}

pub fn apply_lame<T: Real>(params: &LameParams<T>, grid: &Grid<T>, u: &VectorField<T>) -> Result<VectorField<T>> {
    LameOperator::new(params, grid).apply(u)
}

/// `Σ_i ⟨∇_h u_i, ∇_h v_i⟩` with the forward-difference gradient.
pub fn grad_inner<T: Real>(u: &VectorField<T>, v: &VectorField<T>) -> Result<T> {
    u.grid().check_same(v.grid())?;
    let lat = lattice(u.grid());
    let sum: T = (0..3).map(|c| lat.forward_grad_dot(u.component(c), v.component(c))).sum();
    Ok(sum * u.grid().cell_volume())
}

/// `‖∇_h u‖₂²`
pub fn grad_norm_sq<T: Real>(u: &VectorField<T>) -> T {
    let lat = lattice(u.grid());
    let sum: T = (0..3).map(|c| lat.forward_grad_dot(u.component(c), u.component(c))).sum();
    sum * u.grid().cell_volume()
}

/// `‖D_h u‖₂²`
pub fn div_norm_sq<T: Real>(u: &VectorField<T>) -> T {
    let mut div = ScalarField::zeros(u.grid());
    lattice(u.grid()).divergence(u.as_slice(), div.as_mut_slice());
    div.norm_sq()
}

/// `⟨u, v⟩ₑ = μ ⟨∇_h u, ∇_h v⟩ + ε ⟨D_h u, D_h v⟩`
pub fn elastic_inner<T: Real>(params: &LameParams<T>, u: &VectorField<T>, v: &VectorField<T>) -> Result<T> {
    let g = grad_inner(u, v)?;
    if params.eps == T::zero() {
        return Ok(params.mu * g);
    }
    let lat = lattice(u.grid());
    let n = u.grid().node_count();
    let mut du = vec![T::zero(); n];
    let mut dv = vec![T::zero(); n];
    lat.divergence(u.as_slice(), &mut du);
    lat.divergence(v.as_slice(), &mut dv);
    let d = crate::num::dot(&du, &dv) * u.grid().cell_volume();
    Ok(params.mu * g + params.eps * d)
}

/// `‖u‖ₑ²`
pub fn elastic_norm_sq<T: Real>(params: &LameParams<T>, u: &VectorField<T>) -> T {
    let g = grad_norm_sq(u);
    if params.eps == T::zero() {
        params.mu * g
    } else {
        params.mu * g + params.eps * div_norm_sq(u)
    }
}

/// Comparison of `‖u‖ₑ²` with `‖∇_h u‖₂²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllipticReport<T> {
    pub norm_grad_sq: T,
    pub norm_e_sq: T,
    /// `max{μ, 3(λ+μ)}`
    pub a0: T,
    /// `μ ≤ ‖u‖ₑ²/‖∇u‖² ≤ a0`
    pub sandwich_ok: bool,
    /// `max{μ, 3}`, the upper constant quoted for the ε-family with `ε ≤ 1`.
    pub a0_scaled: T,
    pub scaled_ok: bool,
    /// `μ + ε`, the best constant available from `‖D_h u‖ ≤ ‖∇_h u‖`.
    pub a0_sharp: T,
    pub sharp_ok: bool,
}

const SANDWICH_SLACK: f64 = 1e-12;

pub fn norm_sandwich<T: Real>(params: &LameParams<T>, u: &VectorField<T>) -> EllipticReport<T> {
    let g = grad_norm_sq(u);
    let e = elastic_norm_sq(params, u);
    let slack = T::lit(SANDWICH_SLACK) * e.abs().max(g.abs());
    let lower = params.mu * g <= e + slack;
    let within = |c: T| lower && e <= c * g + slack;
    let mu = params.mu;
    let a0 = mu.max(T::lit(3.0) * params.eps);
    let a0_scaled = mu.max(T::lit(3.0));
    let a0_sharp = mu + params.eps;
    EllipticReport {
        norm_grad_sq: g,
        norm_e_sq: e,
        a0,
        sandwich_ok: within(a0),
        a0_scaled,
        scaled_ok: within(a0_scaled),
        a0_sharp,
        sharp_ok: within(a0_sharp),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstEigenvalue<T> {
    /// `λ₁ʰ = Σ (4/h²) sin²(π h / (2L))`, exact for the 7-point stencil.
    pub discrete: T,
    /// `λ₁ = Σ (π/L)²`
    pub continuum: T,
}

pub fn first_eigenvalue<T: Real>(grid: &Grid<T>) -> FirstEigenvalue<T> {
    let k = grid.box_wavevector([1, 1, 1]);
    FirstEigenvalue { discrete: grid.laplacian_symbol(k), continuum: k.iter().map(|&x| x * x).sum() }
}

/// Largest eigenvalue of `-Δ_h`: `Σ (4/h²) cos²(π h / (2L))`.
pub fn laplacian_max_eigenvalue<T: Real>(grid: &Grid<T>) -> T {
    let n = grid.n();
    grid.laplacian_symbol(grid.box_wavevector(n))
}

/// Power-iteration estimate of the smallest eigenvalue of `-Δ_h`, obtained
/// from the largest eigenvalue of `σ I + Δ_h` with `σ = Σ 4/h²`.
pub fn estimate_first_eigenvalue<T: Real>(grid: &Grid<T>, seed: u64, max_iter: usize) -> T {
    let lat = lattice(grid);
    let sigma: T = grid.spacing().iter().map(|&h| T::lit(4.0) / (h * h)).sum();
    let top = power_iteration(
        |x, y| {
            lat.neg_laplacian(x, y, -T::one(), T::zero());
            crate::num::axpy(sigma, x, y);
        },
        grid.node_count(),
        seed,
        T::lit(1e-14).max(T::epsilon()),
        max_iter,
    );
    sigma - top
}

/// Largest eigenvalue of `𝓔_ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralBound<T> {
    /// Power-iteration estimate (a lower bound up to convergence).
    pub estimate: T,
    /// `μ Σ 4/h² + ε Σ 1/h²`, a rigorous upper bound.
    pub upper: T,
}

pub fn max_eigenvalue<T: Real>(params: &LameParams<T>, grid: &Grid<T>, seed: u64) -> SpectralBound<T> {
    let op = LameOperator::new(params, grid);
    let estimate = power_iteration(|x, y| op.apply_into(x, y), op.len(), seed, T::lit(1e-10), 20_000);
    let inv_h2: T = grid.spacing().iter().map(|&h| (h * h).recip()).sum();
    SpectralBound { estimate, upper: params.mu * T::lit(4.0) * inv_h2 + params.eps * inv_h2 }
}
