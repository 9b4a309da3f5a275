use serde::Serialize;

use super::EnergyReport;
use crate::error::{Error, Result};
use crate::forcing::NonlinearitySpec;
use crate::mesh::{Grid, VectorField};
use crate::num::Real;
use crate::operators::{first_eigenvalue, LameParams};

/// Constants of the two-sided energy estimate
/// `K2 ‖z‖²_𝓗 − K3 ≤ E(z) ≤ K1 ‖z‖⁴_𝓗 + K3`.
///
/// Lower side: `Φ ≥ −M‖u‖² − m_f|Ω_h|`, `‖u‖₂² ≤ ‖u‖ₑ²/(μλ₁ʰ)` and
/// `⟨b,u⟩ ≤ (ε̂/4)‖b‖² + ‖u‖²/ε̂` give `K2 = ½ − M/(μλ₁ʰ) − 1/(μλ₁ʰε̂)` and
/// `K3 = m_f|Ω_h| + (ε̂/4)‖b‖²` with `ε̂ = 4/(μλ₁ʰ(1 − 2M/(μλ₁ʰ)))`, i.e.
/// `K2 = (1 − 2M/(μλ₁ʰ))/4`. Without load the Young step is skipped and
/// `K2 = ½ − M/(μλ₁ʰ)`.
///
/// Upper side: the potential density is at most `c2|u|² + cq|u|^q + c4|u|⁴`.
/// On the grid `max_node |u|² ≤ ‖u‖₂²/h₁h₂h₃`, so
/// `Σ |u|^q h₁h₂h₃ ≤ (h₁h₂h₃)^{−(q−2)/2} ‖u‖₂^q`. With `y = ‖z‖²_𝓗/(μλ₁ʰ)`
/// every power `x^s`, `s ∈ [1, 2]`, is bounded by `1 + x²` and `x ≤ (1 + x²)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants<T> {
    pub k1: T,
    pub k2: T,
    /// `max(k3_lower, k3_upper)`
    pub k3: T,
    pub k3_lower: T,
    pub k3_upper: T,
    /// Young parameter, absent when the load vanishes.
    pub eps_hat: Option<T>,
    pub lambda1: T,
}

impl<T: Real> BoundConstants<T> {
    /// `E − (K2 x − K3)` with `x = ‖z‖²_𝓗`; nonnegative when the lower bound holds.
    pub fn lower_margin(&self, e: &EnergyReport<T>) -> T {
        e.total - (self.k2 * e.h_norm_sq - self.k3_lower)
    }

    /// `K1 x² + K3 − E`; nonnegative when the upper bound holds.
    pub fn upper_margin(&self, e: &EnergyReport<T>) -> T {
        self.k1 * e.h_norm_sq * e.h_norm_sq + self.k3_upper - e.total
    }
}

pub fn bound_constants<T: Real>(
    params: &LameParams<T>,
    spec: &NonlinearitySpec<T>,
    load: &VectorField<T>,
    grid: &Grid<T>,
) -> Result<BoundConstants<T>> {
    grid.check_same(load.grid())?;
    let lambda1 = first_eigenvalue(grid).discrete;
    let ml = params.mu() * lambda1;
    let c = spec.constants();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    if !(c.m < ml / two) {
        return Err(Error::invalid(format!(
            "M = {} violates M < μλ₁ʰ/2 = {}",
            c.m,
            ml / two
        )));
    }
    let cv = grid.cell_volume();
    let b2 = super::l2_sq(load);
    let a = two * c.m / ml;
    let (k2, eps_hat, k3_lower) = if b2 > T::zero() {
        let eps_hat = T::lit(4.0) / (ml * (T::one() - a));
        (
            half - c.m / ml - T::one() / (ml * eps_hat),
            Some(eps_hat),
            c.m_f * grid.discrete_volume() + eps_hat / T::lit(4.0) * b2,
        )
    } else {
        (half - c.m / ml, None, c.m_f * grid.discrete_volume())
    };

    // E ≤ A1 x + Aq x^{q/2} + A4 x² + ½‖b‖², x = ‖z‖²_𝓗
    let g = spec.potential_growth();
    let mut a1 = half + g.c2 / ml;
    if b2 > T::zero() {
        a1 += half / ml;
    }
    let aq = if g.cq > T::zero() {
        g.cq * cv.powf(-(g.q - two) / two) * ml.powf(-g.q / two)
    } else {
        T::zero()
    };
    let a4 = if g.c4 > T::zero() { g.c4 / cv / (ml * ml) } else { T::zero() };
    let k1 = half * a1 + aq + a4;
    let k3_upper = half * a1 + aq + half * b2;
    Ok(BoundConstants { k1, k2, k3: k3_lower.max(k3_upper), k3_lower, k3_upper, eps_hat, lambda1 })
}
