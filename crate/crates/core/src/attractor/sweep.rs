use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{build_ensemble, check_cloud, hausdorff_semidistance, sample_attractor, AttractorCloud, CloudChecks};
use super::{EnsembleOptions, SampleOptions};
use crate::dynamics::{bound_constants, simulate, Problem, Scheme, SimOptions, State};
use crate::equilibria::{multistart_stationary, stationary_bound, MultistartOptions, StationarySet};
use crate::error::{Error, Result};
use crate::num::Real;

/// Radius of the ball that absorbs every bounded set, for every ε at once.
///
/// Stationary points satisfy `‖u‖ₑ² ≤ ρ_N²`, and along the attractor the
/// Lyapunov function never exceeds its largest value on the stationary set, so
/// `sup_𝒜 ‖z‖²_𝓗 ≤ (K1 ρ_N⁴ + 2 K3)/K2 = R₁²`. Since `‖z‖_{𝓗₀} ≤ ‖z‖_𝓗`,
/// the ball `‖z‖_{𝓗₀} ≤ R₁ + 1` contains every attractor. Every ingredient
/// depends on μ, λ₁ʰ, the forcing constants and `b`, never on ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AbsorbingRadius {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub rho_n_sq: f64,
    pub r1_sq: f64,
    pub r1: f64,
    /// `R₁ + 1`
    pub ball: f64,
}

pub fn absorbing_radius<T: Real>(problem: &Problem<T>) -> Result<AbsorbingRadius> {
    let k = bound_constants(problem.params(), problem.spec(), problem.load(), problem.grid())?;
    let rho_sq = stationary_bound(problem)?.radius_sq;
    let r1_sq = (k.k1 * rho_sq * rho_sq + T::lit(2.0) * k.k3) / k.k2;
    let r1 = r1_sq.sqrt();
    Ok(AbsorbingRadius {
        k1: k.k1.as_f64(),
        k2: k.k2.as_f64(),
        k3: k.k3.as_f64(),
        rho_n_sq: rho_sq.as_f64(),
        r1_sq: r1_sq.as_f64(),
        r1: r1.as_f64(),
        ball: r1.as_f64() + 1.0,
    })
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::invalid("ε list must not be empty"));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::invalid(format!("ε values must be finite and nonnegative, got {eps_list:?}")));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(format!("ε list must be strictly decreasing, got {eps_list:?}")));
    }
    if *eps_list.last().expect("nonempty") != 0.0 {
        return Err(Error::invalid("ε list must end with 0"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularLimitRow {
    pub eps: f64,
    /// `sup_{t ≤ T} ‖z_ε(t) − z₀(t)‖_{𝓗₀}`
    pub sup_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularLimitTable {
    pub t_end: f64,
    pub dt: f64,
    pub rows: Vec<SingularLimitRow>,
}

impl SingularLimitTable {
    /// `d(ε_{k+1}) ≤ (1 + slack) d(ε_k)` for every consecutive pair.
    pub fn nonincreasing_within(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_dist <= (1.0 + slack) * w[0].sup_dist)
    }

    /// `(d(ε_{k+1})/ε_{k+1}) / (d(ε_k)/ε_k)` over consecutive nonzero ε; close to
    /// one when the distance is linear in ε.
    pub fn linear_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter(|w| w[1].eps > 0.0)
            .map(|w| (w[1].sup_dist / w[1].eps) / (w[0].sup_dist / w[0].eps))
            .collect()
    }
}

/// Runs the same initial data at every ε of `eps_list` (strictly decreasing,
/// ending at 0) and reports the largest 𝓗₀ distance to the ε = 0 run over
/// every step up to `t_end`. Runs at different ε proceed in parallel.
pub fn singular_limit_probe<T: Real>(
    initial: &State<T>,
    problem: &Problem<T>,
    eps_list: &[f64],
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<SingularLimitTable> {
    check_eps_list(eps_list)?;
    let mu = problem.params().mu();
    let opts = SimOptions { keep_states: true, scheme, ..SimOptions::default() };
    let run = |eps: f64| -> Result<Vec<State<T>>> {
        let p = problem.with_eps(T::lit(eps))?;
        Ok(simulate(initial, &p, T::lit(t_end), T::lit(dt), &opts)?.states)
    };
    let reference = run(0.0)?;
    let rows: Vec<Result<SingularLimitRow>> = eps_list
        .par_iter()
        .map(|&eps| {
            if eps == 0.0 {
                return Ok(SingularLimitRow { eps, sup_dist: 0.0 });
            }
            let states = run(eps)?;
            let mut sup = T::zero();
            for (a, b) in states.iter().zip(&reference) {
                sup = sup.max(a.h0_dist_sq(b, mu)?);
            }
            Ok(SingularLimitRow { eps, sup_dist: sup.sqrt().as_f64() })
        })
        .collect();
    Ok(SingularLimitTable { t_end, dt, rows: rows.into_iter().collect::<Result<_>>()? })
}

#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    /// Problem whose ε is replaced by each entry of `eps_list`.
    pub problem: Problem<T>,
    pub eps_list: Vec<f64>,
    pub ensemble: EnsembleOptions,
    pub sample: SampleOptions,
    pub multistart: MultistartOptions,
    /// Horizon and step of the singular-limit probe (started from the first ensemble member).
    pub probe_t: f64,
    pub probe_dt: f64,
    /// Repeat the cloud distances with twice as many members.
    pub double_ensemble: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub d_h0: f64,
    pub sup_traj_dist: f64,
    pub cloud_size: usize,
    pub max_h0_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport<T> {
    pub eps_list: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub probe: SingularLimitTable,
    pub radius: AbsorbingRadius,
    /// `R₁` evaluated at every ε agrees bit for bit.
    pub radius_eps_independent: bool,
    pub checks: Vec<CloudChecks>,
    /// Number of stationary members found at each ε.
    pub stationary_sizes: Vec<usize>,
    /// `d_{𝓗₀}(𝒜_ε, 𝒜₀)` recomputed with a doubled ensemble.
    pub doubled_d_h0: Option<Vec<f64>>,
    #[serde(skip)]
    pub clouds: Vec<AttractorCloud<T>>,
}

impl<T: Real> SweepReport<T> {
    pub const CSV_HEADER: [&'static str; 5] = ["eps", "d_H0", "sup_traj_dist", "cloud_size", "max_H0_norm"];

    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d_h0).collect()
    }

    /// Cloud distances over the nonzero ε are nonincreasing up to `slack`.
    pub fn nonincreasing_within(&self, slack: f64) -> bool {
        let d: Vec<f64> = self.rows.iter().filter(|r| r.eps > 0.0).map(|r| r.d_h0).collect();
        d.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
    }

    /// Distance at the smallest nonzero ε divided by the distance at the largest ε.
    pub fn final_over_initial(&self) -> Option<f64> {
        let nz: Vec<&SweepRow> = self.rows.iter().filter(|r| r.eps > 0.0).collect();
        match (nz.first(), nz.last()) {
            (Some(a), Some(b)) if a.d_h0 > 0.0 => Some(b.d_h0 / a.d_h0),
            _ => None,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                format!("{:.16e}", r.eps),
                format!("{:.16e}", r.d_h0),
                format!("{:.16e}", r.sup_traj_dist),
                r.cloud_size.to_string(),
                format!("{:.16e}", r.max_h0_norm),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn clouds_for<T: Real>(
    config: &SweepConfig<T>,
    ensemble: &[State<T>],
) -> Result<Vec<AttractorCloud<T>>> {
    config
        .eps_list
        .iter()
        .map(|&eps| sample_attractor(&config.problem.with_eps(T::lit(eps))?, ensemble, &config.sample))
        .collect()
}

/// Samples 𝒜_ε for every ε of the list from one shared ensemble (built at
/// ε = 0 around the ε = 0 stationary set) and measures each cloud's
/// semidistance to the ε = 0 cloud.
pub fn epsilon_sweep<T: Real>(config: &SweepConfig<T>) -> Result<SweepReport<T>> {
    check_eps_list(&config.eps_list)?;
    let p0 = config.problem.with_eps(T::zero())?;
    let radius = absorbing_radius(&p0)?;
    let mut radius_eps_independent = true;
    for &eps in &config.eps_list {
        let r = absorbing_radius(&config.problem.with_eps(T::lit(eps))?)?;
        radius_eps_independent &= r.r1_sq.to_bits() == radius.r1_sq.to_bits();
    }
    if config.ensemble.amplitude > radius.ball {
        return Err(Error::invalid(format!(
            "ensemble amplitude {} exceeds the absorbing ball radius {}",
            config.ensemble.amplitude, radius.ball
        )));
    }

    let stationary: Vec<StationarySet<T>> = config
        .eps_list
        .iter()
        .map(|&eps| multistart_stationary(&config.problem.with_eps(T::lit(eps))?, &config.multistart))
        .collect::<Result<_>>()?;
    let s0 = stationary.last().expect("list ends with 0");
    let ensemble: Vec<State<T>> =
        build_ensemble(&p0, Some(s0), &config.ensemble)?.into_iter().map(|m| m.state).collect();

    let clouds = clouds_for(config, &ensemble)?;
    let reference = clouds.last().expect("list ends with 0");
    let mut checks = Vec::with_capacity(clouds.len());
    let mut distances = Vec::with_capacity(clouds.len());
    for ((cloud, set), &eps) in clouds.iter().zip(&stationary).zip(&config.eps_list) {
        let p = config.problem.with_eps(T::lit(eps))?;
        checks.push(check_cloud(cloud, &p, &radius, Some(set))?);
        distances.push(hausdorff_semidistance(cloud, reference)?.as_f64());
    }

    let probe = singular_limit_probe(
        &ensemble[0],
        &config.problem,
        &config.eps_list,
        config.probe_t,
        config.probe_dt,
        config.sample.scheme,
    )?;

    let doubled_d_h0 = if config.double_ensemble {
        let opts = EnsembleOptions { size: 2 * config.ensemble.size, ..config.ensemble };
        let big: Vec<State<T>> = build_ensemble(&p0, Some(s0), &opts)?.into_iter().map(|m| m.state).collect();
        let big_clouds = clouds_for(config, &big)?;
        let big_ref = big_clouds.last().expect("list ends with 0");
        Some(
            big_clouds
                .iter()
                .map(|c| hausdorff_semidistance(c, big_ref).map(|d| d.as_f64()))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let rows = config
        .eps_list
        .iter()
        .zip(&clouds)
        .zip(&distances)
        .zip(&probe.rows)
        .map(|(((&eps, c), &d), pr)| SweepRow {
            eps,
            d_h0: d,
            sup_traj_dist: pr.sup_dist,
            cloud_size: c.len(),
            max_h0_norm: c.max_h0_norm().as_f64(),
        })
        .collect();
    Ok(SweepReport {
        eps_list: config.eps_list.clone(),
        rows,
        probe,
        radius,
        radius_eps_independent,
        checks,
        stationary_sizes: stationary.iter().map(|s| s.len()).collect(),
        doubled_d_h0,
        clouds,
    })
}
