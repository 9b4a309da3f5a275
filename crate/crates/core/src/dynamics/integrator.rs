use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{energy, EnergyReport, Problem, State};
use crate::error::{Error, Result};
use crate::forcing::{eval_f_into, NonlinearitySpec};
use crate::linalg::conjugate_gradient;
use crate::mesh::{VectorField, Grid};
use crate::num::Real;
use crate::operators::{max_eigenvalue, LameParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Implicit midpoint for the linear part with `f` evaluated at the
    /// predicted midpoint `u + (dt/2) v`; one SPD solve per step.
    #[default]
    LinearlyImplicitMidpoint,
    /// Velocity Verlet with a semi-implicit damping term; needs
    /// `dt ≤ 0.9 · 2/√Λmax`.
    Leapfrog,
}

/// Relative residual of the per-step linear solve.
pub const CG_RTOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 10_000;
const CFL_SAFETY: f64 = 0.9;

/// Advances states of one problem with a fixed step.
pub struct Integrator<'a, T> {
    problem: &'a Problem<T>,
    dt: T,
    scheme: Scheme,
    work: [Vec<T>; 4],
    last_cg_iterations: usize,
}

impl<'a, T: Real> Integrator<'a, T> {
    pub fn new(problem: &'a Problem<T>, dt: T, scheme: Scheme) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if scheme == Scheme::Leapfrog {
            let limit = Self::cfl_limit(problem.params(), problem.grid());
            if dt > limit {
                return Err(Error::invalid(format!(
                    "explicit step dt = {dt} exceeds the stability limit {limit}"
                )));
            }
        }
        let len = 3 * problem.grid().node_count();
        Ok(Self { problem, dt, scheme, work: std::array::from_fn(|_| vec![T::zero(); len]), last_cg_iterations: 0 })
    }

    /// `0.9 · 2/√Λ` with `Λ` the rigorous upper bound on the spectrum of `𝓔_ε`.
    pub fn cfl_limit(params: &LameParams<T>, grid: &Grid<T>) -> T {
        let bound = max_eigenvalue(params, grid, 0).upper;
        T::lit(CFL_SAFETY * 2.0) / bound.sqrt()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn last_cg_iterations(&self) -> usize {
        self.last_cg_iterations
    }

    pub fn advance(&mut self, state: &mut State<T>) -> Result<()> {
        self.problem.grid().check_same(state.grid())?;
        match self.scheme {
            Scheme::LinearlyImplicitMidpoint => self.midpoint(state)?,
            Scheme::Leapfrog => self.leapfrog(state),
        }
        state.t += self.dt;
        if !state.u.is_finite() || !state.v.is_finite() {
            return Err(Error::IntegrationFailure { t: state.t.as_f64(), reason: "non-finite state".into() });
        }
        Ok(())
    }

    fn midpoint(&mut self, state: &mut State<T>) -> Result<()> {
        let dt = self.dt;
        let half = T::lit(0.5);
        let op = self.problem.operator();
        let [rhs, fstar, delta, _] = &mut self.work;
        let u = state.u.as_slice();
        let v = state.v.as_slice();
        let b = self.problem.load().as_slice();
        // f at the predicted midpoint
        for i in 0..u.len() {
            delta[i] = u[i] + half * dt * v[i];
        }
        eval_f_into(self.problem.spec(), delta, fstar);
        op.apply_into(u, rhs);
        let c = half * dt * dt;
        for i in 0..u.len() {
            rhs[i] = dt * v[i] - c * (rhs[i] + fstar[i] - b[i]);
            delta[i] = dt * v[i];
        }
        let diag = T::one() + half * self.problem.params().alpha() * dt;
        let quarter = dt * dt / T::lit(4.0);
        let mut tmp = vec![T::zero(); u.len()];
        let stats = conjugate_gradient(
            |x, y| {
                op.apply_into(x, &mut tmp);
                for i in 0..x.len() {
                    y[i] = diag * x[i] + quarter * tmp[i];
                }
            },
            rhs,
            delta,
            T::lit(CG_RTOL),
            CG_MAX_ITER,
        )?;
        self.last_cg_iterations = stats.iterations;
        let two_over_dt = T::lit(2.0) / dt;
        let us = state.u.as_mut_slice();
        for i in 0..us.len() {
            us[i] += delta[i];
        }
        let vs = state.v.as_mut_slice();
        for i in 0..vs.len() {
            vs[i] = two_over_dt * delta[i] - vs[i];
        }
        Ok(())
    }

    fn accel(&mut self, u: &[T], out: &mut [T]) {
        let [_, _, _, f] = &mut self.work;
        self.problem.operator().apply_into(u, out);
        eval_f_into(self.problem.spec(), u, f);
        let b = self.problem.load().as_slice();
        for i in 0..u.len() {
            out[i] = b[i] - out[i] - f[i];
        }
    }

    fn leapfrog(&mut self, state: &mut State<T>) {
        let dt = self.dt;
        let half_dt = T::lit(0.5) * dt;
        let alpha = self.problem.params().alpha();
        let mut a = std::mem::take(&mut self.work[0]);
        self.accel(state.u.as_slice(), &mut a);
        {
            let v = state.v.as_mut_slice();
            for i in 0..v.len() {
                v[i] += half_dt * (a[i] - alpha * v[i]);
            }
        }
        state.u.axpy(dt, &state.v).expect("same grid");
        self.accel(state.u.as_slice(), &mut a);
        let denom = T::one() + half_dt * alpha;
        let v = state.v.as_mut_slice();
        for i in 0..v.len() {
            v[i] = (v[i] + half_dt * a[i]) / denom;
        }
        self.work[0] = a;
    }
}

/// One step from `state`, as a pure function.
pub fn step<T: Real>(
    state: &State<T>,
    params: &LameParams<T>,
    spec: &NonlinearitySpec<T>,
    load: &VectorField<T>,
    dt: T,
    scheme: Scheme,
) -> Result<State<T>> {
    let problem = Problem::new(*params, *spec, load.clone())?;
    let mut next = state.clone();
    Integrator::new(&problem, dt, scheme)?.advance(&mut next)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimOptions {
    /// Ledger entry every `stride` steps.
    pub stride: usize,
    pub scheme: Scheme,
    /// Keep full states at ledger samples (needed for difference probes and clouds).
    pub keep_states: bool,
    /// Abort when the energy rises by more than `energy_tol · (1 + |E₀|)` between samples.
    pub energy_tol: f64,
    pub check_energy: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { stride: 1, scheme: Scheme::default(), keep_states: false, energy_tol: 1e-8, check_energy: true }
    }
}

/// Ledger of one run. Entry `k` is at `times[k]`; entry 0 is the initial state.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub dt: T,
    pub stride: usize,
    pub times: Vec<T>,
    pub energies: Vec<EnergyReport<T>>,
    /// `α ‖v‖₂²` at each sample.
    pub dissipation: Vec<T>,
    pub states: Vec<State<T>>,
    pub final_state: State<T>,
    pub max_cg_iterations: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn totals(&self) -> Vec<T> {
        self.energies.iter().map(|e| e.total).collect()
    }

    /// Largest increase `E_{k+1} − E_k` over the ledger (negative when strictly decreasing).
    pub fn max_energy_increase(&self) -> T {
        self.energies.windows(2).map(|w| w[1].total - w[0].total).fold(T::neg_infinity(), T::max)
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["t", "kinetic", "elastic", "potential", "work", "total", "dissipation", "h_norm_sq"];

    /// Ledger as CSV with full-precision scientific notation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::CSV_HEADER)?;
        for ((t, e), d) in self.times.iter().zip(&self.energies).zip(&self.dissipation) {
            let row = [*t, e.kinetic, e.elastic, e.potential, e.work, e.total, *d, e.h_norm_sq];
            wr.write_record(row.iter().map(|x| format!("{:.16e}", x.as_f64())))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Failed run together with everything recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct SimulationError<T: Real> {
    #[source]
    pub error: Error,
    pub partial: Box<Trajectory<T>>,
}

impl<T: Real> From<SimulationError<T>> for Error {
    fn from(e: SimulationError<T>) -> Self {
        e.error
    }
}

/// Integrates from `initial` up to `t_end` (rounded to a whole number of
/// steps), recording the energy ledger every `opts.stride` steps.
pub fn simulate<T: Real>(
    initial: &State<T>,
    problem: &Problem<T>,
    t_end: T,
    dt: T,
    opts: &SimOptions,
) -> std::result::Result<Trajectory<T>, SimulationError<T>> {
    let empty = |error: Error| SimulationError {
        error,
        partial: Box::new(Trajectory {
            dt,
            stride: opts.stride,
            times: vec![],
            energies: vec![],
            dissipation: vec![],
            states: vec![],
            final_state: initial.clone(),
            max_cg_iterations: 0,
        }),
    };
    if opts.stride == 0 {
        return Err(empty(Error::invalid("stride must be >= 1")));
    }
    if !(t_end >= T::zero()) {
        return Err(empty(Error::invalid(format!("final time must be nonnegative, got {t_end}"))));
    }
    let mut integ = Integrator::new(problem, dt, opts.scheme).map_err(empty)?;
    let e0 = energy(initial, problem).map_err(empty)?;
    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let alpha = problem.params().alpha();
    let tol = T::lit(opts.energy_tol) * (T::one() + e0.total.abs());

    let mut traj = Trajectory {
        dt,
        stride: opts.stride,
        times: vec![initial.t],
        energies: vec![e0],
        dissipation: vec![alpha * super::l2_sq(&initial.v)],
        states: if opts.keep_states { vec![initial.clone()] } else { vec![] },
        final_state: initial.clone(),
        max_cg_iterations: 0,
    };
    let mut state = initial.clone();
    let t0 = initial.t;
    for k in 1..=steps {
        if let Err(error) = integ.advance(&mut state) {
            traj.final_state = state;
            return Err(SimulationError { error, partial: Box::new(traj) });
        }
        // recompute the clock from the step count to avoid drift
        state.t = t0 + T::from_usize_lossy(k) * dt;
        traj.max_cg_iterations = traj.max_cg_iterations.max(integ.last_cg_iterations());
        if k % opts.stride == 0 || k == steps {
            let e = energy(&state, problem).expect("grid checked");
            let prev = traj.energies.last().expect("initial entry").total;
            traj.times.push(state.t);
            traj.energies.push(e);
            traj.dissipation.push(alpha * super::l2_sq(&state.v));
            if opts.keep_states {
                traj.states.push(state.clone());
            }
            if opts.check_energy && e.total - prev > tol {
                let reason = format!(
                    "energy rose from {prev:e} to {:e} (tolerance {tol:e}); reduce dt",
                    e.total
                );
                traj.final_state = state;
                return Err(SimulationError {
                    error: Error::IntegrationFailure { t: traj.times.last().unwrap().as_f64(), reason },
                    partial: Box::new(traj),
                });
            }
        }
    }
    traj.final_state = state;
    Ok(traj)
}
