//! Nonlinearities `f(u) = ∇G(u) + (h₁(u₁), h₂(u₂), h₃(u₃))` and a sampling
//! validator for the structural conditions they must satisfy.
//!
//! Each catalog entry carries hand-proved constants:
//!
//! | name | `G` | `h` | `p` | `M_g` | `c_h` | `M` | `m_f` |
//! |---|---|---|---|---|---|---|---|
//! | `zero` | 0 | 0 | 1 | 1 | 1 | 0 | 0 |
//! | `coupled_power` | `κ/(p+1) ((|u|²+δ²)^{(p+1)/2} − δ^{p+1})` | 0 | p | `κ p max(1, δ^{p−1})` | 1 | 0 | 0 |
//! | `cubic` | 0 | `κ s³` | 1 | 1 | `3κ` | 0 | 0 |
//! | `coupled_power_plus_cubic` | as `coupled_power` | `κ s³` | p | as `coupled_power` | `3κ` | 0 | 0 |
//! | `bounded_sine` | `κ Σ (1 − cos uᵢ)` | 0 | 1 | κ | 1 | κ/2 | 7.5κ |
//!
//! For `coupled_power`, `f·u − G ≥ 0` follows from writing it as
//! `κδ^{p+1} φ(t)` with `t = (|u|²+δ²)/δ²`, `φ(1) = 0` and `φ' ≥ 0` on `t ≥ 1`.
//! For `bounded_sine`, `s sin s ≥ −|s| ≥ −s²/2 − 1/2` per component.
//! Constants that would vanish are replaced by 1 where positivity is required.

mod validate;

pub use validate::{validate_assumptions, ConditionCheck, ValidationReport, MARGIN_SLACK};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::VectorField;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ForcingKind<T> {
    Zero,
    CoupledPower { kappa: T, p: T, delta: T },
    Cubic { kappa: T },
    CoupledPowerPlusCubic { kappa: T, p: T, delta: T },
    BoundedSine { kappa: T },
}

/// Structural constants of a nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForcingConstants<T> {
    /// Growth exponent of `∇g`, in `[1, 3)`.
    pub p: T,
    pub m_g: T,
    pub c_h: T,
    pub m: T,
    pub m_f: T,
}

/// Upper growth of the potential density:
/// `G(u) + Σ Hᵢ(uᵢ) ≤ c2 |u|² + cq |u|^q + c4 |u|⁴` with `q = p + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialGrowth<T> {
    pub c2: T,
    pub cq: T,
    pub q: T,
    pub c4: T,
}

/// Parameters accepted by [`catalog`]; unused ones are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogParams<T> {
    pub kappa: T,
    pub p: T,
    pub delta: T,
}

impl<T: Real> Default for CatalogParams<T> {
    fn default() -> Self {
        Self { kappa: T::one(), p: T::lit(2.0), delta: T::lit(0.1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonlinearitySpec<T> {
    kind: ForcingKind<T>,
    constants: ForcingConstants<T>,
}

pub const CATALOG_NAMES: [&str; 5] = ["zero", "coupled_power", "cubic", "coupled_power_plus_cubic", "bounded_sine"];

/// Looks up a catalog entry by name.
pub fn catalog<T: Real>(name: &str, params: CatalogParams<T>) -> Result<NonlinearitySpec<T>> {
    let CatalogParams { kappa, p, delta } = params;
    match name {
        "zero" => Ok(NonlinearitySpec::zero()),
        "coupled_power" => NonlinearitySpec::coupled_power(kappa, p, delta),
        "cubic" => NonlinearitySpec::cubic(kappa),
        "coupled_power_plus_cubic" => NonlinearitySpec::coupled_power_plus_cubic(kappa, p, delta),
        "bounded_sine" => NonlinearitySpec::bounded_sine(kappa),
        other => Err(Error::invalid(format!(
            "unknown nonlinearity '{other}' (expected one of {})",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

fn check_kappa<T: Real>(kappa: T) -> Result<()> {
    if !(kappa >= T::zero()) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be finite and nonnegative, got {kappa}")));
    }
    Ok(())
}

fn check_power<T: Real>(p: T, delta: T) -> Result<()> {
    if !(p >= T::one() && p < T::lit(3.0)) {
        return Err(Error::invalid(format!("exponent p must lie in [1, 3), got {p}")));
    }
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be finite and nonnegative, got {delta}")));
    }
    Ok(())
}

fn positive_or_one<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::one()
    }
}

fn power_m_g<T: Real>(kappa: T, p: T, delta: T) -> T {
    positive_or_one(kappa * p * T::one().max(delta.powf(p - T::one())))
}

impl<T: Real> NonlinearitySpec<T> {
    pub fn zero() -> Self {
        Self {
            kind: ForcingKind::Zero,
            constants: ForcingConstants { p: T::one(), m_g: T::one(), c_h: T::one(), m: T::zero(), m_f: T::zero() },
        }
    }

    pub fn coupled_power(kappa: T, p: T, delta: T) -> Result<Self> {
        check_kappa(kappa)?;
        check_power(p, delta)?;
        Ok(Self {
            kind: ForcingKind::CoupledPower { kappa, p, delta },
            constants: ForcingConstants {
                p,
                m_g: power_m_g(kappa, p, delta),
                c_h: T::one(),
                m: T::zero(),
                m_f: T::zero(),
            },
        })
    }

    pub fn cubic(kappa: T) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self {
            kind: ForcingKind::Cubic { kappa },
            constants: ForcingConstants {
                p: T::one(),
                m_g: T::one(),
                c_h: positive_or_one(T::lit(3.0) * kappa),
                m: T::zero(),
                m_f: T::zero(),
            },
        })
    }

    pub fn coupled_power_plus_cubic(kappa: T, p: T, delta: T) -> Result<Self> {
        check_kappa(kappa)?;
        check_power(p, delta)?;
        Ok(Self {
            kind: ForcingKind::CoupledPowerPlusCubic { kappa, p, delta },
            constants: ForcingConstants {
                p,
                m_g: power_m_g(kappa, p, delta),
                c_h: positive_or_one(T::lit(3.0) * kappa),
                m: T::zero(),
                m_f: T::zero(),
            },
        })
    }

    pub fn bounded_sine(kappa: T) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self {
            kind: ForcingKind::BoundedSine { kappa },
            constants: ForcingConstants {
                p: T::one(),
                m_g: positive_or_one(kappa),
                c_h: T::one(),
                m: kappa / T::lit(2.0),
                m_f: T::lit(7.5) * kappa,
            },
        })
    }

    /// Replaces the stated constants (e.g. to test a configuration the
    /// validator must reject).
    pub fn with_constants(mut self, constants: ForcingConstants<T>) -> Self {
        self.constants = constants;
        self
    }

    pub fn kind(&self) -> &ForcingKind<T> {
        &self.kind
    }

    pub fn constants(&self) -> &ForcingConstants<T> {
        &self.constants
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ForcingKind::Zero => "zero",
            ForcingKind::CoupledPower { .. } => "coupled_power",
            ForcingKind::Cubic { .. } => "cubic",
            ForcingKind::CoupledPowerPlusCubic { .. } => "coupled_power_plus_cubic",
            ForcingKind::BoundedSine { .. } => "bounded_sine",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ForcingKind::Zero)
    }

    fn power_part(&self) -> Option<(T, T, T)> {
        match self.kind {
            ForcingKind::CoupledPower { kappa, p, delta } | ForcingKind::CoupledPowerPlusCubic { kappa, p, delta } => {
                Some((kappa, p, delta))
            }
            _ => None,
        }
    }

    fn cubic_part(&self) -> Option<T> {
        match self.kind {
            ForcingKind::Cubic { kappa } | ForcingKind::CoupledPowerPlusCubic { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    /// `g(u) = ∇G(u)`
    #[inline]
    pub fn g(&self, u: [T; 3]) -> [T; 3] {
        if let Some((kappa, p, delta)) = self.power_part() {
            let r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + delta * delta;
            let w = kappa * r.powf((p - T::one()) / T::lit(2.0));
            return u.map(|x| w * x);
        }
        if let ForcingKind::BoundedSine { kappa } = self.kind {
            return u.map(|x| kappa * x.sin());
        }
        [T::zero(); 3]
    }

    #[inline]
    pub fn big_g(&self, u: [T; 3]) -> T {
        if let Some((kappa, p, delta)) = self.power_part() {
            let r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + delta * delta;
            let s = (p + T::one()) / T::lit(2.0);
            return kappa / (p + T::one()) * (r.powf(s) - delta.powf(p + T::one()));
        }
        if let ForcingKind::BoundedSine { kappa } = self.kind {
            return u.iter().map(|&x| kappa * (T::one() - x.cos())).sum();
        }
        T::zero()
    }

    /// `hᵢ(s)`; every catalog entry uses the same `h` in all three components.
    #[inline]
    pub fn h(&self, s: T) -> T {
        match self.cubic_part() {
            Some(kappa) => kappa * s * s * s,
            None => T::zero(),
        }
    }

    /// `Hᵢ(s) = ∫₀ˢ hᵢ`
    #[inline]
    pub fn big_h(&self, s: T) -> T {
        match self.cubic_part() {
            Some(kappa) => kappa * s * s * s * s / T::lit(4.0),
            None => T::zero(),
        }
    }

    #[inline]
    pub fn h_prime(&self, s: T) -> T {
        match self.cubic_part() {
            Some(kappa) => T::lit(3.0) * kappa * s * s,
            None => T::zero(),
        }
    }

    /// `f(u) = g(u) + h(u)` at one point.
    #[inline]
    pub fn f(&self, u: [T; 3]) -> [T; 3] {
        let g = self.g(u);
        [g[0] + self.h(u[0]), g[1] + self.h(u[1]), g[2] + self.h(u[2])]
    }

    /// Potential density `G(u) + Σ Hᵢ(uᵢ)`.
    #[inline]
    pub fn density(&self, u: [T; 3]) -> T {
        self.big_g(u) + u.iter().map(|&x| self.big_h(x)).sum::<T>()
    }

    /// `∂g/∂u`, symmetric since `g = ∇G`.
    pub fn jacobian_g(&self, u: [T; 3]) -> [[T; 3]; 3] {
        let mut j = [[T::zero(); 3]; 3];
        if let Some((kappa, p, delta)) = self.power_part() {
            let r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + delta * delta;
            let half = T::lit(0.5);
            if r == T::zero() {
                // δ = 0 at the origin: the Jacobian is κ I for p = 1 and 0 for p > 1
                if p == T::one() {
                    for (i, row) in j.iter_mut().enumerate() {
                        row[i] = kappa;
                    }
                }
                return j;
            }
            let w = kappa * r.powf((p - T::one()) * half);
            let w2 = kappa * (p - T::one()) * r.powf((p - T::lit(3.0)) * half);
            for i in 0..3 {
                for k in 0..3 {
                    j[i][k] = w2 * u[i] * u[k];
                }
                j[i][i] += w;
            }
        } else if let ForcingKind::BoundedSine { kappa } = self.kind {
            for i in 0..3 {
                j[i][i] = kappa * u[i].cos();
            }
        }
        j
    }

    /// Full Jacobian `∂f/∂u`.
    pub fn jacobian(&self, u: [T; 3]) -> [[T; 3]; 3] {
        let mut j = self.jacobian_g(u);
        for i in 0..3 {
            j[i][i] += self.h_prime(u[i]);
        }
        j
    }

    pub fn potential_growth(&self) -> PotentialGrowth<T> {
        let half = T::lit(0.5);
        let mut g = PotentialGrowth { c2: T::zero(), cq: T::zero(), q: self.constants.p + T::one(), c4: T::zero() };
        if let Some((kappa, p, delta)) = self.power_part() {
            // (a+b)^s − b^s ≤ s (a^s + b^{s−1} a) for s = (p+1)/2 ∈ [1,2)
            g.c2 = kappa * half * delta.powf(p - T::one());
            g.cq = kappa * half;
            g.q = p + T::one();
        }
        if let ForcingKind::BoundedSine { kappa } = self.kind {
            g.c2 = kappa * half;
        }
        if let Some(kappa) = self.cubic_part() {
            g.c4 = kappa / T::lit(4.0);
        }
        g
    }
}

/// Writes `f(u)` into `out` (both component-major of length `3N`).
pub(crate) fn eval_f_into<T: Real>(spec: &NonlinearitySpec<T>, u: &[T], out: &mut [T]) {
    let n = u.len() / 3;
    if spec.is_zero() {
        out.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    for idx in 0..n {
        let f = spec.f([u[idx], u[n + idx], u[2 * n + idx]]);
        out[idx] = f[0];
        out[n + idx] = f[1];
        out[2 * n + idx] = f[2];
    }
}

/// Unweighted nodal sum of the potential density.
pub(crate) fn potential_sum<T: Real>(spec: &NonlinearitySpec<T>, u: &[T]) -> T {
    if spec.is_zero() {
        return T::zero();
    }
    let n = u.len() / 3;
    (0..n).map(|idx| spec.density([u[idx], u[n + idx], u[2 * n + idx]])).sum()
}

/// Nodewise `f(u)`.
pub fn eval_f<T: Real>(spec: &NonlinearitySpec<T>, u: &VectorField<T>) -> Result<VectorField<T>> {
    let mut out = VectorField::zeros(u.grid());
    eval_f_into(spec, u.as_slice(), out.as_mut_slice());
    if !out.is_finite() {
        return Err(Error::NumericOverflow(format!("{} nonlinearity produced non-finite values", spec.name())));
    }
    Ok(out)
}

/// `Φ(u) = Σ_nodes (G(u) + Σ Hᵢ(uᵢ)) h₁h₂h₃`
pub fn eval_potential<T: Real>(spec: &NonlinearitySpec<T>, u: &VectorField<T>) -> T {
    potential_sum(spec, u.as_slice()) * u.grid().cell_volume()
}

pub fn eval_jacobian<T: Real>(spec: &NonlinearitySpec<T>, u: [T; 3]) -> [[T; 3]; 3] {
    spec.jacobian(u)
}
