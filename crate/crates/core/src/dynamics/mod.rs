//! Time integration of `∂ₜ²u + 𝓔_ε u + α ∂ₜu + f(u) = b` and the energy ledger
//! that accompanies every trajectory.

mod bounds;
mod integrator;
mod probes;

pub use bounds::{bound_constants, BoundConstants};
pub use integrator::{simulate, step, Integrator, Scheme, SimOptions, SimulationError, Trajectory};
pub use probes::{
    continuous_dependence_probe, difference_energy, dissipation_residual, fit_exponential_envelope,
    stabilizability_exponent, DifferenceEnergy, DissipationResidual, Envelope,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::{eval_f_into, potential_sum, NonlinearitySpec};
use crate::mesh::{Grid, VectorField};
use crate::num::{dot, Real};
use crate::operators::{elastic_norm_sq, grad_norm_sq, LameOperator, LameParams};

/// Point `(u, ∂ₜu)` of the phase space at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub u: VectorField<T>,
    pub v: VectorField<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn new(u: VectorField<T>, v: VectorField<T>, t: T) -> Result<Self> {
        u.grid().check_same(v.grid())?;
        if !u.is_finite() || !v.is_finite() || !t.is_finite() {
            return Err(Error::NumericOverflow("state contains non-finite values".into()));
        }
        Ok(Self { u, v, t })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { u: VectorField::zeros(grid), v: VectorField::zeros(grid), t: T::zero() }
    }

    /// Rest state `(u, 0)` at `t = 0`.
    pub fn at_rest(u: VectorField<T>) -> Self {
        let v = VectorField::zeros(u.grid());
        Self { u, v, t: T::zero() }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.u.grid()
    }

    /// `‖(u, v)‖²_𝓗 = ‖u‖ₑ² + ‖v‖₂²`
    pub fn h_norm_sq(&self, params: &LameParams<T>) -> T {
        elastic_norm_sq(params, &self.u) + l2_sq(&self.v)
    }

    /// ε-independent `‖(u, v)‖²_{𝓗₀} = μ‖∇_h u‖₂² + ‖v‖₂²`
    pub fn h0_norm_sq(&self, mu: T) -> T {
        mu * grad_norm_sq(&self.u) + l2_sq(&self.v)
    }

    /// `‖(u₁−u₂, v₁−v₂)‖²_𝓗`
    pub fn h_dist_sq(&self, other: &Self, params: &LameParams<T>) -> Result<T> {
        let d = Self { u: self.u.sub(&other.u)?, v: self.v.sub(&other.v)?, t: T::zero() };
        Ok(d.h_norm_sq(params))
    }

    pub fn h0_dist_sq(&self, other: &Self, mu: T) -> Result<T> {
        let d = Self { u: self.u.sub(&other.u)?, v: self.v.sub(&other.v)?, t: T::zero() };
        Ok(d.h0_norm_sq(mu))
    }
}

pub(crate) fn l2_sq<T: Real>(v: &VectorField<T>) -> T {
    dot(v.as_slice(), v.as_slice()) * v.grid().cell_volume()
}

/// Parameters, nonlinearity and load of one damped Lamé problem.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    params: LameParams<T>,
    spec: NonlinearitySpec<T>,
    load: VectorField<T>,
    op: LameOperator<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(params: LameParams<T>, spec: NonlinearitySpec<T>, load: VectorField<T>) -> Result<Self> {
        if !load.is_finite() {
            return Err(Error::invalid("load contains non-finite values"));
        }
        let op = LameOperator::new(&params, load.grid());
        Ok(Self { params, spec, load, op })
    }

    /// Unforced problem (`b = 0`) on `grid`.
    pub fn unforced(params: LameParams<T>, spec: NonlinearitySpec<T>, grid: &Grid<T>) -> Self {
        let load = VectorField::zeros(grid);
        let op = LameOperator::new(&params, grid);
        Self { params, spec, load, op }
    }

    /// The same problem with coupling `eps`.
    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::new(self.params.with_eps(eps)?, self.spec, self.load.clone())
    }

    pub fn params(&self) -> &LameParams<T> {
        &self.params
    }

    pub fn spec(&self) -> &NonlinearitySpec<T> {
        &self.spec
    }

    pub fn load(&self) -> &VectorField<T> {
        &self.load
    }

    pub fn grid(&self) -> &Grid<T> {
        self.load.grid()
    }

    pub fn operator(&self) -> &LameOperator<T> {
        &self.op
    }

    /// Stationary residual `𝓔u + f(u) − b`.
    pub fn residual(&self, u: &VectorField<T>) -> Result<VectorField<T>> {
        self.grid().check_same(u.grid())?;
        let mut out = VectorField::zeros(self.grid());
        self.residual_into(u.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn residual_into(&self, u: &[T], out: &mut [T]) {
        self.op.apply_into(u, out);
        let mut f = vec![T::zero(); u.len()];
        eval_f_into(&self.spec, u, &mut f);
        for ((o, fi), bi) in out.iter_mut().zip(&f).zip(self.load.as_slice()) {
            *o += *fi - *bi;
        }
    }

    /// Lyapunov functional `Ψ(u, v)`, equal to the total energy.
    pub fn lyapunov(&self, state: &State<T>) -> Result<T> {
        Ok(energy(state, self)?.total)
    }
}

/// Terms of `E = ½‖v‖² + ½‖u‖ₑ² + Φ(u) − ⟨b, u⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport<T> {
    pub kinetic: T,
    pub elastic: T,
    pub potential: T,
    pub work: T,
    pub total: T,
    pub h_norm_sq: T,
}

pub fn energy<T: Real>(state: &State<T>, problem: &Problem<T>) -> Result<EnergyReport<T>> {
    problem.grid().check_same(state.grid())?;
    let half = T::lit(0.5);
    let cv = problem.grid().cell_volume();
    let v2 = l2_sq(&state.v);
    let e2 = elastic_norm_sq(&problem.params, &state.u);
    let kinetic = half * v2;
    let elastic = half * e2;
    let potential = potential_sum(&problem.spec, state.u.as_slice()) * cv;
    let work = -dot(problem.load.as_slice(), state.u.as_slice()) * cv;
    Ok(EnergyReport { kinetic, elastic, potential, work, total: kinetic + elastic + potential + work, h_norm_sq: e2 + v2 })
}

#[cfg(test)]
mod tests;
