use serde::Serialize;

use super::{simulate, Problem, SimOptions, State, Trajectory};
use crate::error::{Error, Result};
use crate::mesh::norm_lp;
use crate::num::Real;
use crate::operators::LameParams;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationResidual<T> {
    /// `r_k = (E_{k+1} − E_k)/dt + α(‖v_k‖² + ‖v_{k+1}‖²)/2`
    pub series: Vec<T>,
    pub max_abs: T,
}

/// Discrete defect of `E' = −α‖∂ₜu‖²`. For the linear part of the midpoint
/// scheme it equals `α‖v_{k+1} − v_k‖²/4`, hence `O(dt²)`.
pub fn dissipation_residual<T: Real>(traj: &Trajectory<T>, params: &LameParams<T>) -> Result<DissipationResidual<T>> {
    if traj.stride != 1 {
        return Err(Error::invalid(format!("dissipation residual needs a stride-1 ledger, got stride {}", traj.stride)));
    }
    let series: Vec<T> = (0..traj.len().saturating_sub(1))
        .map(|k| {
            let de = traj.energies[k + 1].total - traj.energies[k].total;
            let dt = traj.times[k + 1] - traj.times[k];
            // α‖v‖² = 2α · kinetic
            de / dt + params.alpha() * (traj.energies[k].kinetic + traj.energies[k + 1].kinetic)
        })
        .collect();
    let max_abs = series.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    Ok(DissipationResidual { series, max_abs })
}

/// `sup_{t ≤ T} ‖S(t)z₁ − S(t)z₂‖²_𝓗 / ‖z₁ − z₂‖²_𝓗`, with `0/0 := 0`.
pub fn continuous_dependence_probe<T: Real>(
    z1: &State<T>,
    z2: &State<T>,
    problem: &Problem<T>,
    t_end: T,
    dt: T,
) -> Result<T> {
    let params = problem.params();
    let d0 = z1.h_dist_sq(z2, params)?;
    if d0 == T::zero() {
        return Ok(T::zero());
    }
    let opts = SimOptions { keep_states: true, ..SimOptions::default() };
    let a = simulate(z1, problem, t_end, dt, &opts)?;
    let b = simulate(z2, problem, t_end, dt, &opts)?;
    let mut sup = T::zero();
    for (sa, sb) in a.states.iter().zip(&b.states) {
        sup = sup.max(sa.h_dist_sq(sb, params)?);
    }
    Ok(sup / d0)
}

/// `p₀ = max{4, 6/(4 − p)}`
pub fn stabilizability_exponent<T: Real>(p: T) -> T {
    T::lit(4.0).max(T::lit(6.0) / (T::lit(4.0) - p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifferenceEnergy<T> {
    pub times: Vec<T>,
    /// `Ξ(t) = ½‖(w, ∂ₜw)‖²_𝓗` with `w = u¹ − u²`
    pub xi: Vec<T>,
    pub p0: T,
    /// `sup_{s ≤ t} ‖w(s)‖_{p₀}`
    pub sup_w_p0: Vec<T>,
}

/// Difference energy of two trajectories recorded with `keep_states` on the same times.
pub fn difference_energy<T: Real>(
    traj1: &Trajectory<T>,
    traj2: &Trajectory<T>,
    params: &LameParams<T>,
    p: T,
) -> Result<DifferenceEnergy<T>> {
    if traj1.states.len() != traj2.states.len() || traj1.states.is_empty() {
        return Err(Error::invalid(format!(
            "trajectories need equally many stored states ({} vs {})",
            traj1.states.len(),
            traj2.states.len()
        )));
    }
    let tol = T::lit(1e-9) * traj1.dt;
    let p0 = stabilizability_exponent(p);
    let mut out = DifferenceEnergy { times: vec![], xi: vec![], p0, sup_w_p0: vec![] };
    let mut sup = T::zero();
    for (a, b) in traj1.states.iter().zip(&traj2.states) {
        if (a.t - b.t).abs() > tol {
            return Err(Error::invalid(format!("sample times differ: {} vs {}", a.t, b.t)));
        }
        let w = State { u: a.u.sub(&b.u)?, v: a.v.sub(&b.v)?, t: a.t };
        out.times.push(a.t);
        out.xi.push(T::lit(0.5) * w.h_norm_sq(params));
        sup = sup.max(norm_lp(&w.u, p0)?);
        out.sup_w_p0.push(sup);
    }
    Ok(out)
}

/// Envelope `y(t) ≤ a e^{−c (t − t₀)} y(t₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope<T> {
    pub a: T,
    pub c: T,
}

/// Fits the decay rate `c` by least squares on `log y` and then takes the
/// smallest `a` that makes the envelope hold at every sample. Samples that
/// are not positive are skipped in the fit (and trivially satisfy the bound).
pub fn fit_exponential_envelope<T: Real>(times: &[T], values: &[T]) -> Result<Envelope<T>> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::invalid("envelope fit needs at least two matching samples"));
    }
    let y0 = values[0];
    if !(y0 > T::zero()) {
        return Err(Error::invalid("envelope fit needs a positive initial value"));
    }
    let t0 = times[0];
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > T::zero())
        .map(|(&t, &y)| (t - t0, y.ln()))
        .collect();
    let n = T::from_usize_lossy(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let c = -slope;
    let a = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| y / y0 * (c * (t - t0)).exp())
        .fold(T::zero(), T::max);
    Ok(Envelope { a, c })
}
