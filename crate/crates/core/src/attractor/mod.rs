//! Attractor proxies: ensembles evolved past a transient, the Hausdorff
//! semidistance between the resulting clouds, and the experiments that vary
//! the coupling `ε = λ + μ` towards zero.
//!
//! Clouds are compared in the ε-independent norm
//! `‖(u, v)‖²_{𝓗₀} = μ‖∇_h u‖₂² + ‖v‖₂²`.

mod sweep;

pub use sweep::{
    absorbing_radius, epsilon_sweep, singular_limit_probe, AbsorbingRadius, SingularLimitRow, SingularLimitTable,
    SweepConfig, SweepReport, SweepRow,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{simulate, Problem, Scheme, SimOptions, State};
use crate::equilibria::StationarySet;
use crate::error::{Error, Result};
use crate::mesh::{box_mode, random_low_mode_field, VectorField};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleOptions {
    pub size: usize,
    pub seed: u64,
    /// Largest 𝓗₀-norm of the generated initial data.
    pub amplitude: f64,
    /// Highest box-mode number in random smooth fields.
    pub max_mode: usize,
    /// Relative size of the perturbation added to equilibria.
    pub perturbation: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { size: 32, seed: 0, amplitude: 20.0, max_mode: 2, perturbation: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    RandomSmooth,
    PerturbedEquilibrium,
    ScaledBoxMode,
}

#[derive(Clone, Debug)]
pub struct EnsembleMember<T> {
    pub kind: MemberKind,
    pub state: State<T>,
}

fn scale_to<T: Real>(u: &VectorField<T>, v: &VectorField<T>, mu: T, target: T) -> State<T> {
    let s = State::at_rest(u.clone());
    let s = State { v: v.clone(), ..s };
    let n = s.h0_norm_sq(mu).sqrt();
    if n > T::zero() {
        State { u: u.scaled(target / n), v: v.scaled(target / n), t: T::zero() }
    } else {
        s
    }
}

/// Deterministic ensemble cycling through random smooth data, perturbed
/// equilibria (when `stationary` has members) and scaled box modes. Member
/// `i` draws from its own generator seeded with `seed + i`.
pub fn build_ensemble<T: Real>(
    problem: &Problem<T>,
    stationary: Option<&StationarySet<T>>,
    opts: &EnsembleOptions,
) -> Result<Vec<EnsembleMember<T>>> {
    if !(opts.amplitude > 0.0) {
        return Err(Error::invalid(format!("ensemble amplitude must be positive, got {}", opts.amplitude)));
    }
    let grid = *problem.grid();
    let mu = problem.params().mu();
    let amp = T::lit(opts.amplitude);
    let members_n = stationary.map_or(0, |s| s.len());
    (0..opts.size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let radius = amp * T::lit(rng.gen_range(0.2f64..=1.0));
            let kind = match i % 3 {
                1 if members_n > 0 => MemberKind::PerturbedEquilibrium,
                2 => MemberKind::ScaledBoxMode,
                _ => MemberKind::RandomSmooth,
            };
            let state = match kind {
                MemberKind::RandomSmooth => {
                    let u = random_low_mode_field(&grid, opts.max_mode, &mut rng);
                    let v = random_low_mode_field(&grid, opts.max_mode, &mut rng);
                    scale_to(&u, &v, mu, radius)
                }
                MemberKind::PerturbedEquilibrium => {
                    let set = stationary.expect("checked above");
                    let base = &set.members[(i / 3) % members_n].u;
                    let du = random_low_mode_field(&grid, opts.max_mode, &mut rng);
                    let dv = random_low_mode_field(&grid, opts.max_mode, &mut rng);
                    let pert = scale_to(&du, &dv, mu, T::lit(opts.perturbation) * radius);
                    State { u: base.add(&pert.u)?, v: pert.v, t: T::zero() }
                }
                MemberKind::ScaledBoxMode => {
                    let m = [0; 3].map(|_| rng.gen_range(1..=2usize));
                    let m = [0, 1, 2].map(|a| m[a].min(grid.n()[a]));
                    let d = [0; 3].map(|_| rng.gen_range(-1.0f64..=1.0));
                    let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-12);
                    let d = d.map(|x| T::lit(x / dn));
                    let u = box_mode(&grid, m, d, T::one())?;
                    scale_to(&u, &VectorField::zeros(&grid), mu, radius)
                }
            };
            Ok(EnsembleMember { kind, state })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleOptions {
    pub t_transient: f64,
    pub t_sample: f64,
    pub dt: f64,
    /// Cloud point every `stride` steps during the sampling window.
    pub stride: usize,
    pub scheme: Scheme,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { t_transient: 12.0, t_sample: 2.0, dt: 0.02, stride: 10, scheme: Scheme::default() }
    }
}

/// What happened to one ensemble member.
#[derive(Clone, Debug)]
pub struct MemberRun<T> {
    pub final_state: State<T>,
    /// Lyapunov values at every ledger entry of the transient and sampling runs.
    pub lyapunov: Vec<T>,
    /// Largest increase between consecutive entries of `lyapunov`.
    pub max_increase: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct CloudProvenance {
    pub ensemble_size: usize,
    pub t_transient: f64,
    pub t_sample: f64,
    pub dt: f64,
    pub stride: usize,
}

#[derive(Clone, Debug)]
pub struct AttractorCloud<T> {
    pub eps: T,
    pub mu: T,
    pub points: Vec<State<T>>,
    pub norm_tag: &'static str,
    pub provenance: CloudProvenance,
    pub runs: Vec<MemberRun<T>>,
}

impl<T: Real> AttractorCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_h0_norm(&self) -> T {
        self.points.iter().map(|p| p.h0_norm_sq(self.mu).sqrt()).fold(T::zero(), T::max)
    }

    /// Cloud made of the given states (no runs attached).
    pub fn from_points(eps: T, mu: T, points: Vec<State<T>>) -> Self {
        let provenance = CloudProvenance { ensemble_size: 0, t_transient: 0.0, t_sample: 0.0, dt: 0.0, stride: 0 };
        Self { eps, mu, points, norm_tag: "H0", provenance, runs: vec![] }
    }
}

fn tag_member(i: usize, e: Error) -> Error {
    match e {
        Error::IntegrationFailure { t, reason } => {
            Error::IntegrationFailure { t, reason: format!("ensemble member {i}: {reason}") }
        }
        other => other,
    }
}

/// Evolves every member for `t_transient`, then records cloud points every
/// `stride` steps for `t_sample`. Members run in parallel; output order is
/// the ensemble order.
pub fn sample_attractor<T: Real>(
    problem: &Problem<T>,
    ensemble: &[State<T>],
    opts: &SampleOptions,
) -> Result<AttractorCloud<T>> {
    if opts.stride == 0 {
        return Err(Error::invalid("cloud stride must be >= 1"));
    }
    if ensemble.is_empty() {
        return Err(Error::invalid("ensemble must not be empty"));
    }
    if !(opts.t_transient > 0.0 && opts.t_sample > 0.0) {
        return Err(Error::invalid(format!(
            "transient and sampling times must be positive, got {} and {}",
            opts.t_transient, opts.t_sample
        )));
    }
    let dt = T::lit(opts.dt);
    let runs: Vec<Result<(MemberRun<T>, Vec<State<T>>)>> = ensemble
        .par_iter()
        .enumerate()
        .map(|(i, z0)| {
            let transient_opts = SimOptions { stride: opts.stride, scheme: opts.scheme, ..SimOptions::default() };
            let pre = simulate(z0, problem, T::lit(opts.t_transient), dt, &transient_opts)
                .map_err(|e| tag_member(i, e.error))?;
            let mut start = pre.final_state.clone();
            start.t = T::zero();
            let sample_opts = SimOptions { keep_states: true, ..transient_opts };
            let post = simulate(&start, problem, T::lit(opts.t_sample), dt, &sample_opts)
                .map_err(|e| tag_member(i, e.error))?;
            let mut lyapunov = pre.totals();
            lyapunov.extend(post.totals().into_iter().skip(1));
            let max_increase = lyapunov.windows(2).map(|w| w[1] - w[0]).fold(T::neg_infinity(), T::max);
            let run = MemberRun { final_state: post.final_state.clone(), lyapunov, max_increase };
            Ok((run, post.states))
        })
        .collect();
    let mut points = Vec::new();
    let mut member_runs = Vec::with_capacity(runs.len());
    for r in runs {
        let (run, pts) = r?;
        points.extend(pts);
        member_runs.push(run);
    }
    Ok(AttractorCloud {
        eps: problem.params().eps(),
        mu: problem.params().mu(),
        points,
        norm_tag: "H0",
        provenance: CloudProvenance {
            ensemble_size: ensemble.len(),
            t_transient: opts.t_transient,
            t_sample: opts.t_sample,
            dt: opts.dt,
            stride: opts.stride,
        },
        runs: member_runs,
    })
}

/// Post-conditions of a sampled cloud.
#[derive(Clone, Debug, Serialize)]
pub struct CloudChecks {
    pub eps: f64,
    pub max_h0_norm: f64,
    /// `R₁ + 1`
    pub ball_radius: f64,
    pub inside_ball: bool,
    pub max_lyapunov: f64,
    /// Largest Lyapunov value over the stationary set, when one was given.
    pub stationary_max_lyapunov: Option<f64>,
    pub lyapunov_cap_ok: Option<bool>,
    /// Largest step-to-step increase of any member's Lyapunov series.
    pub max_lyapunov_increase: f64,
    /// Smallest `LYAPUNOV_ROUNDOFF · (1 + |Ψ|) − increase` over all steps.
    pub lyapunov_monotone_margin: f64,
    pub lyapunov_nonincreasing: bool,
    /// Largest terminal `‖v‖₂` over members.
    pub max_terminal_speed: f64,
    /// Largest `‖u − u*‖ₑ` from a terminal state to its nearest stationary member.
    pub max_terminal_distance: Option<f64>,
    pub endgame_ok: Option<bool>,
}

impl CloudChecks {
    pub fn all_pass(&self) -> bool {
        self.inside_ball
            && self.lyapunov_nonincreasing
            && self.lyapunov_cap_ok.unwrap_or(true)
            && self.endgame_ok.unwrap_or(true)
    }
}

pub const LYAPUNOV_CAP_SLACK: f64 = 1e-3;
pub const ENDGAME_SPEED_TOL: f64 = 1e-4;
pub const ENDGAME_DISTANCE_TOL: f64 = 1e-2;
/// Increases of the Lyapunov series below `ROUNDOFF · (1 + |Ψ|)` are rounding noise.
pub const LYAPUNOV_ROUNDOFF: f64 = 1e-12;

/// Absorbing-ball, Lyapunov-cap, monotonicity and endgame checks for `cloud`.
/// The endgame distance is measured to members of `stationary`, which should
/// be computed for the same `problem`.
pub fn check_cloud<T: Real>(
    cloud: &AttractorCloud<T>,
    problem: &Problem<T>,
    radius: &AbsorbingRadius,
    stationary: Option<&StationarySet<T>>,
) -> Result<CloudChecks> {
    let max_h0_norm = cloud.max_h0_norm().as_f64();
    let mut max_lyapunov = f64::NEG_INFINITY;
    for p in &cloud.points {
        max_lyapunov = max_lyapunov.max(problem.lyapunov(p)?.as_f64());
    }
    let mut max_increase = f64::NEG_INFINITY;
    let mut monotone_margin = f64::INFINITY;
    let mut max_speed = 0.0f64;
    let mut max_dist: Option<f64> = None;
    for run in &cloud.runs {
        for w in run.lyapunov.windows(2) {
            let inc = (w[1] - w[0]).as_f64();
            max_increase = max_increase.max(inc);
            monotone_margin = monotone_margin.min(LYAPUNOV_ROUNDOFF * (1.0 + w[0].as_f64().abs()) - inc);
        }
        max_speed = max_speed.max(crate::dynamics::l2_sq(&run.final_state.v).sqrt().as_f64());
        if let Some(set) = stationary {
            if let Some((_, d)) = set.nearest(&run.final_state.u, problem)? {
                max_dist = Some(max_dist.unwrap_or(0.0).max(d.as_f64()));
            }
        }
    }
    let stationary_max = stationary.and_then(|s| s.max_lyapunov()).map(|x| x.as_f64());
    let endgame_ok = stationary.map(|_| {
        max_speed <= ENDGAME_SPEED_TOL && max_dist.is_some_and(|d| d <= ENDGAME_DISTANCE_TOL)
    });
    Ok(CloudChecks {
        eps: cloud.eps.as_f64(),
        max_h0_norm,
        ball_radius: radius.ball,
        inside_ball: max_h0_norm <= radius.ball,
        max_lyapunov,
        stationary_max_lyapunov: stationary_max,
        lyapunov_cap_ok: stationary_max.map(|s| max_lyapunov <= s + LYAPUNOV_CAP_SLACK),
        max_lyapunov_increase: max_increase,
        lyapunov_monotone_margin: monotone_margin,
        lyapunov_nonincreasing: monotone_margin >= 0.0,
        max_terminal_speed: max_speed,
        max_terminal_distance: max_dist,
        endgame_ok,
    })
}

/// Semidistance with the points that realize it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Semidistance<T> {
    pub value: T,
    /// Index in `A` of the point farthest from `B` (first one on ties).
    pub worst: usize,
    /// Index in `B` of its nearest neighbour.
    pub nearest: usize,
}

/// `sup_{a ∈ A} inf_{b ∈ B} ‖a − b‖_{𝓗₀}` by exhaustive search.
pub fn hausdorff_semidistance_detail<T: Real>(
    a: &AttractorCloud<T>,
    b: &AttractorCloud<T>,
) -> Result<Semidistance<T>> {
    if b.points.is_empty() {
        return Err(Error::invalid("semidistance to an empty cloud is undefined"));
    }
    let mu = a.mu;
    let per_point: Vec<Result<(T, usize)>> = a
        .points
        .par_iter()
        .map(|p| {
            let mut best = (T::infinity(), 0);
            for (j, q) in b.points.iter().enumerate() {
                let d = p.h0_dist_sq(q, mu)?;
                if d < best.0 {
                    best = (d, j);
                }
            }
            Ok(best)
        })
        .collect();
    let mut out = Semidistance { value: T::zero(), worst: 0, nearest: 0 };
    let mut worst_sq = T::neg_infinity();
    for (i, r) in per_point.into_iter().enumerate() {
        let (d, j) = r?;
        if d > worst_sq {
            worst_sq = d;
            out = Semidistance { value: d.sqrt(), worst: i, nearest: j };
        }
    }
    Ok(out)
}

pub fn hausdorff_semidistance<T: Real>(a: &AttractorCloud<T>, b: &AttractorCloud<T>) -> Result<T> {
    Ok(hausdorff_semidistance_detail(a, b)?.value)
}
