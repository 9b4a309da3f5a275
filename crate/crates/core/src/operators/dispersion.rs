//! Wave speeds and discrete dispersion checks.
//!
//! On the Dirichlet grid a sine box mode is an exact eigenfield of `-Δ_h` but
//! not of the grad-div block once `ε > 0` (the central divergence mixes sine
//! and cosine factors). There the check compares the measured Rayleigh
//! quotient with its closed form. On the periodic lattice, plane waves
//! `d cos(k·x)` with `d` parallel or orthogonal to the discrete wave vector
//! are exact eigenfields, and the check measures the eigen-residual too.

use serde::Serialize;

use super::stencil::Lattice;
use super::{LameOperator, LameParams};
use crate::error::{Error, Result};
use crate::mesh::{box_mode, Grid};
use crate::num::{dot, norm3, Real};

/// Continuum P- and S-wave speeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaveSpeeds<T> {
    /// `√((λ+2μ)/ρ)`
    pub p: T,
    /// `√(μ/ρ)`
    pub s: T,
}

impl<T: Real> WaveSpeeds<T> {
    pub fn from_moduli(mu: T, lambda: T, rho: T) -> Result<Self> {
        if !(mu > T::zero()) || !(rho > T::zero()) {
            return Err(Error::invalid(format!("mu and rho must be positive, got mu = {mu}, rho = {rho}")));
        }
        let p_modulus = lambda + T::lit(2.0) * mu;
        if !(p_modulus > T::zero()) {
            return Err(Error::invalid(format!("lambda + 2 mu = {p_modulus} <= 0 gives an imaginary P speed")));
        }
        Ok(Self { p: (p_modulus / rho).sqrt(), s: (mu / rho).sqrt() })
    }
}

/// Continuum speeds for the wave vector `k`; the medium is non-dispersive so
/// `k` only has to be nonzero.
pub fn dispersion_speeds<T: Real>(params: &LameParams<T>, k: [T; 3]) -> Result<WaveSpeeds<T>> {
    if !(norm3(k) > T::zero()) {
        return Err(Error::invalid("wave vector must be nonzero"));
    }
    WaveSpeeds::from_moduli(params.mu(), params.lambda(), params.rho())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Polarization {
    Longitudinal,
    Transverse,
}

/// Outcome of applying `𝓔_ε` to one mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeCheck<T> {
    /// Closed-form discrete value.
    pub symbol: T,
    /// Measured `⟨𝓔u, u⟩ / ⟨u, u⟩`.
    pub rayleigh: T,
    /// `‖𝓔u − symbol u‖ / ‖u‖`; zero for exact eigenfields.
    pub eigen_residual: T,
    /// Continuum eigenvalue `(λ+2μ)|k|²` or `μ|k|²`.
    pub continuum: T,
    /// Discrete phase speed `√(symbol/ρ) / |k|`.
    pub phase_speed: T,
}

impl<T: Real> ModeCheck<T> {
    pub fn rayleigh_error(&self) -> T {
        (self.rayleigh - self.symbol).abs()
    }

    pub fn discretization_error(&self) -> T {
        (self.symbol - self.continuum).abs()
    }
}

fn measure<T: Real>(
    op: &LameOperator<T>,
    u: &[T],
    symbol: T,
    continuum: T,
    k: [T; 3],
    rho: T,
) -> ModeCheck<T> {
    let mut eu = vec![T::zero(); u.len()];
    op.apply_into(u, &mut eu);
    let uu = dot(u, u);
    let rayleigh = dot(&eu, u) / uu;
    let res: T = eu.iter().zip(u).map(|(&a, &b)| (a - symbol * b).powi(2)).sum();
    ModeCheck {
        symbol,
        rayleigh,
        eigen_residual: (res / uu).sqrt(),
        continuum,
        phase_speed: (symbol / rho).sqrt() / norm3(k),
    }
}

fn continuum_value<T: Real>(params: &LameParams<T>, k: [T; 3], pol: Polarization) -> T {
    let k2 = k.iter().map(|&x| x * x).sum::<T>();
    match pol {
        Polarization::Longitudinal => (params.lambda() + T::lit(2.0) * params.mu()) * k2,
        Polarization::Transverse => params.mu() * k2,
    }
}

/// Rayleigh quotient of `𝓔_ε` on the Dirichlet box mode `d Π sin(k_a x_a)`
/// with mode numbers `1 <= m_a <= n_a`. The closed form is
/// `μ Λ_h(k) + ε Σ d_a² (sin(k_a h_a)/h_a)² (n_a − 1)/(n_a + 1)`.
/// `continuum` is reported for the polarization closest to `d`.
pub fn dirichlet_mode_check<T: Real>(
    params: &LameParams<T>,
    grid: &Grid<T>,
    m: [usize; 3],
    d: [T; 3],
) -> Result<ModeCheck<T>> {
    let n = grid.n();
    for a in 0..3 {
        if m[a] == 0 || m[a] > n[a] {
            return Err(Error::invalid(format!("mode number m[{a}] = {} outside 1..={}", m[a], n[a])));
        }
    }
    let u = box_mode(grid, m, d, T::one())?;
    let k = grid.box_wavevector(m);
    let h = grid.spacing();
    let div_part: T = (0..3)
        .map(|a| {
            let s = (k[a] * h[a]).sin() / h[a];
            let nf = T::from_usize_lossy(n[a]);
            d[a] * d[a] * s * s * (nf - T::one()) / (nf + T::one())
        })
        .sum();
    let symbol = params.mu() * grid.laplacian_symbol(k) + params.eps() * div_part;
    let kn = norm3(k);
    let cos = crate::num::dot3(d, k).abs() / kn;
    let pol = if cos * cos >= T::lit(0.5) { Polarization::Longitudinal } else { Polarization::Transverse };
    let op = LameOperator::new(params, grid);
    Ok(measure(&op, u.as_slice(), symbol, continuum_value(params, k, pol), k, params.rho()))
}

/// Fully periodic lattice with `nodes` points per axis at `x = q L / nodes`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeriodicLattice<T> {
    lengths: [T; 3],
    nodes: [usize; 3],
}

impl<T: Real> PeriodicLattice<T> {
    pub fn new(lengths: [T; 3], nodes: [usize; 3]) -> Result<Self> {
        // validation shared with the Dirichlet grid
        Grid::new(lengths, nodes)?;
        if nodes.iter().any(|&q| q < 3) {
            return Err(Error::invalid("periodic lattice needs at least 3 nodes per axis"));
        }
        Ok(Self { lengths, nodes })
    }

    /// Periodic lattice with the same spacing as `grid`: `n + 1` nodes per axis.
    pub fn matching(grid: &Grid<T>) -> Result<Self> {
        Self::new(grid.lengths(), grid.n().map(|q| q + 1))
    }

    pub fn spacing(&self) -> [T; 3] {
        [0, 1, 2].map(|a| self.lengths[a] / T::from_usize_lossy(self.nodes[a]))
    }

    pub fn nodes(&self) -> [usize; 3] {
        self.nodes
    }

    pub(crate) fn lattice(&self) -> Lattice<T> {
        Lattice { n: self.nodes, h: self.spacing(), periodic: true }
    }

    /// Wave vector `2π m / L`.
    pub fn wavevector(&self, m: [i64; 3]) -> [T; 3] {
        [0, 1, 2].map(|a| T::lit(2.0 * m[a] as f64) * T::PI() / self.lengths[a])
    }

    /// `s_a = sin(k_a h_a) / h_a`, the symbol of the central difference.
    pub fn central_symbol(&self, k: [T; 3]) -> [T; 3] {
        let h = self.spacing();
        [0, 1, 2].map(|a| (k[a] * h[a]).sin() / h[a])
    }

    /// `Λ_h(k) = Σ (4/h²) sin²(k h / 2)`
    pub fn laplacian_symbol(&self, k: [T; 3]) -> T {
        let h = self.spacing();
        (0..3)
            .map(|a| {
                let s = (k[a] * h[a] / T::lit(2.0)).sin();
                T::lit(4.0) * s * s / (h[a] * h[a])
            })
            .sum()
    }

    /// Component-major samples of `d cos(k·x)`.
    pub fn plane_wave(&self, k: [T; 3], d: [T; 3]) -> Vec<T> {
        let h = self.spacing();
        let [n0, n1, n2] = self.nodes;
        let n = n0 * n1 * n2;
        let mut out = vec![T::zero(); 3 * n];
        let mut idx = 0;
        for q2 in 0..n2 {
            for q1 in 0..n1 {
                for q0 in 0..n0 {
                    let x = [q0, q1, q2];
                    let phase: T = (0..3).map(|a| k[a] * T::from_usize_lossy(x[a]) * h[a]).sum();
                    let c = phase.cos();
                    for comp in 0..3 {
                        out[comp * n + idx] = d[comp] * c;
                    }
                    idx += 1;
                }
            }
        }
        out
    }
}

/// Applies the periodic `𝓔_ε` (same stencil kernels as the Dirichlet
/// operator) to a longitudinal or transverse plane wave with integer wave
/// numbers `m`. Eigenvalues are `μ Λ_h + ε |s|²` and `μ Λ_h`.
pub fn periodic_mode_check<T: Real>(
    params: &LameParams<T>,
    lattice: &PeriodicLattice<T>,
    m: [i64; 3],
    pol: Polarization,
) -> Result<ModeCheck<T>> {
    let k = lattice.wavevector(m);
    let s = lattice.central_symbol(k);
    let sn = norm3(s);
    if !(sn > T::epsilon().sqrt() * norm3(k).max(T::one())) {
        return Err(Error::invalid(format!("mode {m:?} has a vanishing discrete wave vector on this lattice")));
    }
    let d = match pol {
        Polarization::Longitudinal => s.map(|x| x / sn),
        Polarization::Transverse => {
            // any unit vector orthogonal to s; cross with the axis least aligned
            let a = (0..3).min_by(|&i, &j| s[i].abs().partial_cmp(&s[j].abs()).unwrap()).unwrap();
            let mut e = [T::zero(); 3];
            e[a] = T::one();
            let c = [s[1] * e[2] - s[2] * e[1], s[2] * e[0] - s[0] * e[2], s[0] * e[1] - s[1] * e[0]];
            let cn = norm3(c);
            c.map(|x| x / cn)
        }
    };
    let lam = lattice.laplacian_symbol(k);
    let symbol = match pol {
        Polarization::Longitudinal => params.mu() * lam + params.eps() * sn * sn,
        Polarization::Transverse => params.mu() * lam,
    };
    let lat = lattice.lattice();
    // the operator only needs a grid for bookkeeping; the lattice drives the stencil
    let grid = Grid::new(lattice.lengths, lattice.nodes)?;
    let op = LameOperator::from_lattice(lat, grid, params.mu(), params.eps());
    let u = lattice.plane_wave(k, d);
    Ok(measure(&op, &u, symbol, continuum_value(params, k, pol), k, params.rho()))
}
