//! Stationary solutions `𝓔_ε u + f(u) = b` by damped Newton, the a-priori
//! bound every solution obeys, and a multistart search for the stationary set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{Problem, State};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgError};
use crate::mesh::{random_low_mode_field, VectorField};
use crate::num::{dot, Real};
use crate::operators::{elastic_norm_sq, first_eigenvalue};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Absolute tolerance on the discrete L² norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative tolerance of the inner Krylov solve.
    pub linear_rtol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, max_halvings: 30, linear_rtol: 1e-13 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium<T> {
    pub u: VectorField<T>,
    /// `‖𝓔u + f(u) − b‖₂`
    pub residual_norm: T,
    /// `Ψ(u, 0)`
    pub lyapunov_value: T,
    /// `‖u‖ₑ`, the 𝓗-norm of `(u, 0)`.
    pub h_norm: T,
    pub iterations: usize,
    /// Residual norm before each Newton step and after the last one.
    pub residual_history: Vec<T>,
    /// Steps that needed the dense fallback because the Jacobian was indefinite.
    pub dense_steps: usize,
}

/// Newton failure carrying the last iterate.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct NewtonFailure<T: Real> {
    #[source]
    pub error: Error,
    pub last: VectorField<T>,
    pub residual_history: Vec<T>,
}

impl<T: Real> From<NewtonFailure<T>> for Error {
    fn from(e: NewtonFailure<T>) -> Self {
        e.error
    }
}

fn l2<T: Real>(x: &[T], cv: T) -> T {
    (dot(x, x) * cv).sqrt()
}

/// Jacobian `𝓔 + ∂f/∂u(u)` frozen at one iterate.
struct Jacobian<'a, T> {
    problem: &'a Problem<T>,
    blocks: Vec<[[T; 3]; 3]>,
}

impl<'a, T: Real> Jacobian<'a, T> {
    fn at(problem: &'a Problem<T>, u: &[T]) -> Self {
        let n = u.len() / 3;
        let spec = problem.spec();
        let blocks = if spec.is_zero() {
            vec![]
        } else {
            (0..n).map(|i| spec.jacobian([u[i], u[n + i], u[2 * n + i]])).collect()
        };
        Self { problem, blocks }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.problem.operator().apply_into(x, y);
        let n = x.len() / 3;
        for (i, j) in self.blocks.iter().enumerate() {
            let xi = [x[i], x[n + i], x[2 * n + i]];
            for r in 0..3 {
                y[r * n + i] += j[r][0] * xi[0] + j[r][1] * xi[1] + j[r][2] * xi[2];
            }
        }
    }

    /// Dense LU solve in f64; used when the Jacobian is not positive definite.
    fn dense_solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let len = rhs.len();
        let mut a = DMatrix::<f64>::zeros(len, len);
        let mut e = vec![T::zero(); len];
        let mut col = vec![T::zero(); len];
        for j in 0..len {
            e[j] = T::one();
            self.apply(&e, &mut col);
            e[j] = T::zero();
            for i in 0..len {
                a[(i, j)] = col[i].as_f64();
            }
        }
        let b = DVector::from_iterator(len, rhs.iter().map(|x| x.as_f64()));
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolverFailure("singular Jacobian in stationary solve".into()))?;
        Ok(x.iter().map(|&v| T::lit(v)).collect())
    }
}

/// Damped Newton from `guess`.
pub fn solve_stationary<T: Real>(
    problem: &Problem<T>,
    guess: &VectorField<T>,
    opts: &NewtonOptions,
) -> std::result::Result<Equilibrium<T>, NewtonFailure<T>> {
    let fail = |error, last: VectorField<T>, hist: Vec<T>| NewtonFailure { error, last, residual_history: hist };
    if let Err(e) = problem.grid().check_same(guess.grid()) {
        return Err(fail(e, guess.clone(), vec![]));
    }
    let cv = problem.grid().cell_volume();
    let tol = T::lit(opts.tol);
    let len = guess.as_slice().len();
    let mut u = guess.clone();
    let mut r = vec![T::zero(); len];
    let mut trial_r = vec![T::zero(); len];
    problem.residual_into(u.as_slice(), &mut r);
    let mut rn = l2(&r, cv);
    let mut history = vec![rn];
    let mut dense_steps = 0;
    let mut iterations = 0;
    while !(rn <= tol) {
        if iterations == opts.max_iter || !rn.is_finite() {
            let error = Error::NoConvergence { iterations, residual: rn.as_f64() };
            return Err(fail(error, u, history));
        }
        iterations += 1;
        let jac = Jacobian::at(problem, u.as_slice());
        let rhs: Vec<T> = r.iter().map(|&x| -x).collect();
        let mut delta = vec![T::zero(); len];
        match conjugate_gradient(|x, y| jac.apply(x, y), &rhs, &mut delta, T::lit(opts.linear_rtol), 20 * len) {
            Ok(_) => {}
            Err(CgError::Indefinite { .. }) | Err(CgError::NotConverged { .. }) => {
                delta = match jac.dense_solve(&rhs) {
                    Ok(d) => d,
                    Err(e) => return Err(fail(e, u, history)),
                };
                dense_steps += 1;
            }
        }
        // backtracking on the residual norm
        let mut s = T::one();
        let mut best: Option<(T, T)> = None;
        let mut trial = u.clone();
        for _ in 0..=opts.max_halvings {
            for (t, (&ui, &di)) in trial.as_mut_slice().iter_mut().zip(u.as_slice().iter().zip(&delta)) {
                *t = ui + s * di;
            }
            problem.residual_into(trial.as_slice(), &mut trial_r);
            let tn = l2(&trial_r, cv);
            if tn.is_finite() && best.is_none_or(|(_, b)| tn < b) {
                best = Some((s, tn));
            }
            if tn.is_finite() && tn <= (T::one() - T::lit(1e-4) * s) * rn {
                break;
            }
            s = s * T::lit(0.5);
        }
        let Some((s, _)) = best else {
            let error = Error::NoConvergence { iterations, residual: rn.as_f64() };
            return Err(fail(error, u, history));
        };
        for (ui, &di) in u.as_mut_slice().iter_mut().zip(&delta) {
            *ui += s * di;
        }
        problem.residual_into(u.as_slice(), &mut r);
        rn = l2(&r, cv);
        history.push(rn);
    }
    let lyapunov_value = problem.lyapunov(&State::at_rest(u.clone())).expect("grid checked");
    let h_norm = elastic_norm_sq(problem.params(), &u).sqrt();
    Ok(Equilibrium { u, residual_norm: rn, lyapunov_value, h_norm, iterations, residual_history: history, dense_steps })
}

/// A-priori bound on stationary solutions,
/// `(1 − 2M/(λ₁ʰμ) − 1/(4λ₁ʰμ ε̂)) ‖u‖ₑ² ≤ 2 m_f |Ω_h| + ε̂ ‖b‖²`,
/// with `ε̂ = 4/(λ₁ʰμ(1 − 2M/(λ₁ʰμ)))` (and `ε̂ → ∞` when `b = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StationaryBound<T> {
    pub coefficient: T,
    pub rhs: T,
    /// `ρ² = rhs / coefficient`: every stationary `u` has `‖u‖ₑ² ≤ ρ²`.
    pub radius_sq: T,
}

pub fn stationary_bound<T: Real>(problem: &Problem<T>) -> Result<StationaryBound<T>> {
    let grid = problem.grid();
    let ml = problem.params().mu() * first_eigenvalue(grid).discrete;
    let c = problem.spec().constants();
    let a = T::lit(2.0) * c.m / ml;
    if !(a < T::one()) {
        return Err(Error::invalid(format!("M = {} violates M < μλ₁ʰ/2", c.m)));
    }
    let load = problem.load().as_slice();
    let b2 = dot(load, load) * grid.cell_volume();
    let base = T::lit(2.0) * c.m_f * grid.discrete_volume();
    let (coefficient, rhs) = if b2 > T::zero() {
        let eps_hat = T::lit(4.0) / (ml * (T::one() - a));
        (T::one() - a - T::one() / (T::lit(4.0) * ml * eps_hat), base + eps_hat * b2)
    } else {
        (T::one() - a, base)
    };
    Ok(StationaryBound { coefficient, rhs, radius_sq: rhs / coefficient })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck<T> {
    /// `coefficient · ‖u‖ₑ²`
    pub lhs: T,
    pub rhs: T,
    /// `rhs − lhs`
    pub margin: T,
    pub pass: bool,
}

pub fn bound_check<T: Real>(eq: &Equilibrium<T>, problem: &Problem<T>) -> Result<BoundCheck<T>> {
    problem.grid().check_same(eq.u.grid())?;
    let sb = stationary_bound(problem)?;
    let lhs = sb.coefficient * elastic_norm_sq(problem.params(), &eq.u);
    let margin = sb.rhs - lhs;
    let slack = T::lit(1e-12) * (T::one() + sb.rhs.abs());
    Ok(BoundCheck { lhs, rhs: sb.rhs, margin, pass: margin >= -slack })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultistartOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Two solutions closer than this in the 𝓗-norm are the same member.
    pub merge_tol: f64,
    /// Highest box-mode number used for random guesses.
    pub max_mode: usize,
    pub newton: NewtonOptions,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        Self { n_starts: 16, seed: 0, merge_tol: 1e-6, max_mode: 2, newton: NewtonOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct StationarySet<T> {
    pub members: Vec<Equilibrium<T>>,
    pub checks: Vec<BoundCheck<T>>,
    pub bound: StationaryBound<T>,
    /// Number of Newton runs (the zero guess plus `n_starts` random guesses).
    pub starts: usize,
    pub failures: usize,
}

impl<T: Real> StationarySet<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn all_bounded(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_lyapunov(&self) -> Option<T> {
        self.members.iter().map(|m| m.lyapunov_value).reduce(T::max)
    }

    /// Nearest member to `u` in `‖·‖ₑ` for `problem`'s parameters: `(index, distance)`.
    pub fn nearest(&self, u: &VectorField<T>, problem: &Problem<T>) -> Result<Option<(usize, T)>> {
        let mut best: Option<(usize, T)> = None;
        for (i, m) in self.members.iter().enumerate() {
            let d = elastic_norm_sq(problem.params(), &u.sub(&m.u)?).sqrt();
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        Ok(best)
    }
}

/// Newton from the zero guess and from `n_starts` random smooth guesses whose
/// energy norms are spread over the ball given by [`stationary_bound`].
/// Runs in parallel; the result does not depend on scheduling.
pub fn multistart_stationary<T: Real>(problem: &Problem<T>, opts: &MultistartOptions) -> Result<StationarySet<T>> {
    let bound = stationary_bound(problem)?;
    let grid = *problem.grid();
    let radius = bound.radius_sq.sqrt();
    let mut guesses = vec![VectorField::zeros(&grid)];
    for i in 0..opts.n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        let shape = random_low_mode_field(&grid, opts.max_mode, &mut rng);
        let norm = elastic_norm_sq(problem.params(), &shape).sqrt();
        let target = radius * T::lit(rng.gen_range(0.0f64..=1.0).cbrt());
        guesses.push(if norm > T::zero() { shape.scaled(target / norm) } else { shape });
    }
    let results: Vec<_> = guesses.par_iter().map(|g| solve_stationary(problem, g, &opts.newton)).collect();

    let merge = T::lit(opts.merge_tol);
    let mut members: Vec<Equilibrium<T>> = Vec::new();
    let mut failures = 0;
    for res in results {
        match res {
            Ok(eq) => {
                let mut duplicate = false;
                for m in &members {
                    if elastic_norm_sq(problem.params(), &eq.u.sub(&m.u)?).sqrt() <= merge {
                        duplicate = true;
                        break;
                    }
                }
                if !duplicate {
                    members.push(eq);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let checks = members.iter().map(|m| bound_check(m, problem)).collect::<Result<Vec<_>>>()?;
    Ok(StationarySet { members, checks, bound, starts: guesses.len(), failures })
}

#[cfg(test)]
mod tests;
