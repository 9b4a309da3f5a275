use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lamelab::attractor::{
    absorbing_radius, build_ensemble, check_cloud, epsilon_sweep, sample_attractor, CloudChecks, SweepConfig,
    ENDGAME_DISTANCE_TOL, ENDGAME_SPEED_TOL, LYAPUNOV_CAP_SLACK,
};
use lamelab::dynamics::{bound_constants, dissipation_residual, simulate, SimOptions, State};
use lamelab::equilibria::multistart_stationary;
use lamelab::forcing::{validate_assumptions, MARGIN_SLACK};
use lamelab::mesh::{io, VectorField};
use lamelab::operators::{
    dirichlet_mode_check, dispersion_speeds, periodic_mode_check, PeriodicLattice, Polarization, WaveSpeeds,
};
use lamelab::{Error, Result};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, FieldFormat, Resolved};
use crate::manifest::{Check, Failure};

/// Where artifacts go and what has been produced so far.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub res: &'a Resolved,
    pub dir: PathBuf,
    pub checks_enabled: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig, res: &'a Resolved, dir: &Path, checks_enabled: bool) -> Self {
        Self { cfg, res, dir: dir.to_path_buf(), checks_enabled, checks: vec![], artifacts: vec![] }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn write_field(&mut self, stem: &str, field: &VectorField<f64>) -> Result<()> {
        match self.cfg.output.field_format {
            FieldFormat::Csv => {
                let mut w = self.create(&format!("{stem}.csv"))?;
                io::write_csv(field, &mut w)?;
                w.flush()?;
            }
            FieldFormat::Binary => {
                let mut w = self.create(&format!("{stem}.bin"))?;
                io::write_binary(field, &mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    fn check(&mut self, c: Check) {
        if self.checks_enabled {
            self.checks.push(c);
        }
    }
}

/// Runs the configured experiment. Numerical failures come back as a
/// [`Failure`]; artifacts written before the failure stay on disk.
pub fn run(ctx: &mut Context<'_>) -> Option<Failure> {
    let result = match ctx.cfg.experiment {
        Experiment::Simulate => simulate_experiment(ctx),
        Experiment::Stationary => stationary_experiment(ctx),
        Experiment::Attractor => attractor_experiment(ctx),
        Experiment::Sweep => sweep_experiment(ctx),
        Experiment::Dispersion => dispersion_experiment(ctx),
        Experiment::Validate => validate_experiment(ctx),
    };
    result.err().map(|e| Failure::from(&e))
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    final_time: f64,
    initial_energy: f64,
    final_energy: f64,
    max_energy_increase: f64,
    /// Only with a stride-1 ledger.
    max_dissipation_residual: Option<f64>,
    max_cg_iterations: usize,
}

/// Energy rises below `MONOTONE_ROUNDOFF · (1 + |E₀|)` count as rounding noise.
const MONOTONE_ROUNDOFF: f64 = 1e-12;

fn simulate_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let p = &ctx.res.problem;
    let t = ctx.cfg.time();
    let z0 = ctx.cfg.initial_state(&ctx.res.grid)?;
    let opts = SimOptions { stride: t.stride, scheme: t.scheme, ..SimOptions::default() };
    let traj = match simulate(&z0, p, t.t_end, t.dt, &opts) {
        Ok(traj) => traj,
        Err(e) => {
            let mut w = ctx.create("energy.csv")?;
            e.partial.write_csv(&mut w)?;
            w.flush()?;
            return Err(e.error);
        }
    };
    let mut w = ctx.create("energy.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    ctx.write_field("final_u", &traj.final_state.u)?;
    ctx.write_field("final_v", &traj.final_state.v)?;

    let totals = traj.totals();
    let e0 = totals[0];
    let inc = traj.max_energy_increase();
    let residual = if t.stride == 1 && traj.len() > 1 {
        Some(dissipation_residual(&traj, p.params())?.max_abs)
    } else {
        None
    };
    ctx.write_json(
        "summary.json",
        &SimulationSummary {
            steps: (t.t_end / t.dt).round() as usize,
            final_time: traj.final_state.t,
            initial_energy: e0,
            final_energy: *totals.last().unwrap(),
            max_energy_increase: inc,
            max_dissipation_residual: residual,
            max_cg_iterations: traj.max_cg_iterations,
        },
    )?;

    let tol = MONOTONE_ROUNDOFF * (1.0 + e0.abs());
    let inc_margin = if traj.len() > 1 { tol - inc } else { tol };
    ctx.check(Check::from_margin("energy_monotone", inc_margin, format!("largest energy increase {inc:e}")));
    match bound_constants(p.params(), p.spec(), p.load(), p.grid()) {
        Ok(k) => {
            let margin = traj
                .energies
                .iter()
                .map(|e| k.lower_margin(e).min(k.upper_margin(e)))
                .fold(f64::INFINITY, f64::min);
            ctx.check(Check::from_margin(
                "energy_bounds",
                margin,
                format!("K1={:e} K2={:e} K3={:e}", k.k1, k.k2, k.k3),
            ));
        }
        Err(e) => ctx.check(Check::flag("energy_bounds", false, f64::NAN, e.to_string())),
    }
    Ok(())
}

#[derive(Serialize)]
struct MemberSummary {
    residual_norm: f64,
    lyapunov: f64,
    h_norm: f64,
    iterations: usize,
    dense_steps: usize,
    bound_margin: f64,
}

#[derive(Serialize)]
struct StationarySummary {
    starts: usize,
    failures: usize,
    bound_coefficient: f64,
    bound_rhs: f64,
    bound_radius_sq: f64,
    members: Vec<MemberSummary>,
}

fn stationary_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let p = &ctx.res.problem;
    let set = multistart_stationary(p, &ctx.cfg.multistart())?;
    let members = set
        .members
        .iter()
        .zip(&set.checks)
        .map(|(m, c)| MemberSummary {
            residual_norm: m.residual_norm,
            lyapunov: m.lyapunov_value,
            h_norm: m.h_norm,
            iterations: m.iterations,
            dense_steps: m.dense_steps,
            bound_margin: c.margin,
        })
        .collect();
    ctx.write_json(
        "stationary.json",
        &StationarySummary {
            starts: set.starts,
            failures: set.failures,
            bound_coefficient: set.bound.coefficient,
            bound_rhs: set.bound.rhs,
            bound_radius_sq: set.bound.radius_sq,
            members,
        },
    )?;
    for (i, m) in set.members.iter().enumerate() {
        ctx.write_field(&format!("stationary_{i}_u"), &m.u)?;
    }
    let min_margin = set.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let tol = ctx.cfg.multistart().newton.tol;
    let max_res = set.members.iter().map(|m| m.residual_norm).fold(0.0, f64::max);
    ctx.check(Check::from_margin(
        "stationary_found",
        set.len() as f64 - 1.0,
        format!("{} member(s) from {} starts, {} failed", set.len(), set.starts, set.failures),
    ));
    ctx.check(Check::flag(
        "stationary_bound",
        set.all_bounded() && !set.is_empty(),
        min_margin,
        format!("a-priori bound ||u||_E^2 <= {:e}", set.bound.radius_sq),
    ));
    ctx.check(Check::from_margin("stationary_residual", tol - max_res, format!("largest residual {max_res:e}")));
    Ok(())
}

fn cloud_check_entries(c: &[&CloudChecks]) -> Vec<Check> {
    let min = |f: &dyn Fn(&CloudChecks) -> f64| c.iter().map(|x| f(x)).fold(f64::INFINITY, f64::min);
    let ball = min(&|x| x.ball_radius - x.max_h0_norm);
    let cap = min(&|x| match x.stationary_max_lyapunov {
        Some(s) => s + LYAPUNOV_CAP_SLACK - x.max_lyapunov,
        None => f64::NAN,
    });
    let mono = min(&|x| x.lyapunov_monotone_margin);
    let endgame = min(&|x| {
        (ENDGAME_SPEED_TOL - x.max_terminal_speed).min(ENDGAME_DISTANCE_TOL - x.max_terminal_distance.unwrap_or(f64::NAN))
    });
    vec![
        Check::flag("absorbing_ball", c.iter().all(|x| x.inside_ball), ball, "cloud H0-norms within R1+1"),
        Check::flag(
            "lyapunov_cap",
            c.iter().all(|x| x.lyapunov_cap_ok == Some(true)),
            cap,
            format!("cloud Lyapunov values below the stationary maximum + {LYAPUNOV_CAP_SLACK:e}"),
        ),
        Check::flag(
            "lyapunov_monotone",
            c.iter().all(|x| x.lyapunov_nonincreasing),
            mono,
            "member Lyapunov series nonincreasing up to rounding",
        ),
        Check::flag(
            "gradient_endgame",
            c.iter().all(|x| x.endgame_ok == Some(true)),
            endgame,
            format!("terminal |v| <= {ENDGAME_SPEED_TOL:e} and distance to N <= {ENDGAME_DISTANCE_TOL:e}"),
        ),
    ]
}

#[derive(Serialize)]
struct AttractorSummary<'a> {
    eps: f64,
    cloud_size: usize,
    stationary_members: usize,
    radius: lamelab::attractor::AbsorbingRadius,
    checks: &'a CloudChecks,
    provenance: &'a lamelab::attractor::CloudProvenance,
}

fn attractor_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let p = &ctx.res.problem;
    let set = multistart_stationary(p, &ctx.cfg.multistart())?;
    let radius = absorbing_radius(p)?;
    let ens: Vec<State<f64>> =
        build_ensemble(p, Some(&set), &ctx.cfg.ensemble())?.into_iter().map(|m| m.state).collect();
    let cloud = sample_attractor(p, &ens, &ctx.cfg.sample())?;
    let checks = check_cloud(&cloud, p, &radius, Some(&set))?;

    let mut w = ctx.create("cloud.csv")?;
    {
        let mut wr = csv::Writer::from_writer(&mut w);
        wr.write_record(["point", "h0_norm", "lyapunov"]).map_err(|e| Error::Format(e.to_string()))?;
        for (i, pt) in cloud.points.iter().enumerate() {
            let lyap = p.lyapunov(pt)?;
            wr.write_record([
                i.to_string(),
                format!("{:.16e}", pt.h0_norm_sq(cloud.mu).sqrt()),
                format!("{lyap:.16e}"),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        wr.flush()?;
    }
    w.flush()?;
    ctx.write_json(
        "attractor.json",
        &AttractorSummary {
            eps: cloud.eps,
            cloud_size: cloud.len(),
            stationary_members: set.len(),
            radius,
            checks: &checks,
            provenance: &cloud.provenance,
        },
    )?;
    for c in cloud_check_entries(&[&checks]) {
        ctx.check(c);
    }
    Ok(())
}

fn monotone_margin(values: &[f64], slack: f64) -> f64 {
    values.windows(2).map(|w| (1.0 + slack) * w[0] - w[1]).fold(f64::INFINITY, f64::min)
}

fn sweep_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let a = &ctx.cfg.attractor;
    let config = SweepConfig {
        problem: ctx.res.problem.clone(),
        eps_list: a.eps_list.clone(),
        ensemble: ctx.cfg.ensemble(),
        sample: ctx.cfg.sample(),
        multistart: ctx.cfg.multistart(),
        probe_t: a.probe_t,
        probe_dt: ctx.cfg.time().dt,
        double_ensemble: a.double_ensemble,
    };
    let rep = epsilon_sweep(&config)?;
    ctx.write_json("sweep.json", &rep)?;
    let mut w = ctx.create("sweep.csv")?;
    rep.write_csv(&mut w)?;
    w.flush()?;

    ctx.check(Check::flag(
        "radius_eps_independent",
        rep.radius_eps_independent,
        if rep.radius_eps_independent { 0.0 } else { -1.0 },
        format!("R1 = {:e}", rep.radius.r1),
    ));
    let all: Vec<&CloudChecks> = rep.checks.iter().collect();
    for c in cloud_check_entries(&all) {
        ctx.check(c);
    }
    let probe: Vec<f64> = rep.probe.rows.iter().map(|r| r.sup_dist).collect();
    ctx.check(Check::from_margin(
        "trajectory_distance_monotone",
        monotone_margin(&probe, 0.05),
        format!("sup-trajectory distances {probe:?}, 5% slack"),
    ));
    let d: Vec<f64> = rep.rows.iter().filter(|r| r.eps > 0.0).map(|r| r.d_h0).collect();
    ctx.check(Check::from_margin(
        "cloud_distance_monotone",
        monotone_margin(&d, 0.10),
        format!("d_H0 over nonzero eps {d:?}, 10% slack"),
    ));
    let shrink = match (d.first(), d.last()) {
        (Some(first), Some(last)) => first - last,
        _ => f64::NAN,
    };
    ctx.check(Check::from_margin("cloud_distance_decreases", shrink, "d_H0 at the smallest nonzero eps <= at the largest"));
    Ok(())
}

#[derive(Serialize)]
struct DispersionRow {
    lattice: &'static str,
    m1: i64,
    m2: i64,
    m3: i64,
    polarization: &'static str,
    symbol: f64,
    rayleigh: f64,
    eigen_residual: f64,
    continuum: f64,
    phase_speed: f64,
}

#[derive(Serialize)]
struct DispersionSummary {
    p_speed: Option<f64>,
    s_speed: Option<f64>,
    speed_error: Option<String>,
    rows: usize,
}

fn dispersion_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let params = ctx.res.params;
    let grid = ctx.res.grid;
    let lat = PeriodicLattice::matching(&grid)?;
    let mut rows = Vec::new();
    let mut worst_rq = 0.0f64;
    let mut worst_eig = 0.0f64;
    for &m in &ctx.cfg.dispersion.modes {
        let mi = m.map(|x| x as i64);
        for (pol, name) in [(Polarization::Longitudinal, "longitudinal"), (Polarization::Transverse, "transverse")] {
            let c = periodic_mode_check(&params, &lat, mi, pol)?;
            worst_eig = worst_eig.max(c.eigen_residual.max(c.rayleigh_error()) / c.symbol);
            rows.push(DispersionRow {
                lattice: "periodic",
                m1: mi[0],
                m2: mi[1],
                m3: mi[2],
                polarization: name,
                symbol: c.symbol,
                rayleigh: c.rayleigh,
                eigen_residual: c.eigen_residual,
                continuum: c.continuum,
                phase_speed: c.phase_speed,
            });
        }
        let n = grid.n();
        if (0..3).all(|a| m[a] >= 1 && m[a] <= n[a]) {
            let k = grid.box_wavevector(m);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let along = k.map(|x| x / kn);
            let across = {
                let c = [along[1] - along[2], along[2] - along[0], along[0] - along[1]];
                let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                if cn > 0.0 {
                    c.map(|x| x / cn)
                } else {
                    [0.0, 0.0, 1.0]
                }
            };
            for (d, name) in [(along, "longitudinal"), (across, "transverse")] {
                let c = dirichlet_mode_check(&params, &grid, m, d)?;
                worst_rq = worst_rq.max(c.rayleigh_error() / c.symbol);
                rows.push(DispersionRow {
                    lattice: "dirichlet",
                    m1: mi[0],
                    m2: mi[1],
                    m3: mi[2],
                    polarization: name,
                    symbol: c.symbol,
                    rayleigh: c.rayleigh,
                    eigen_residual: c.eigen_residual,
                    continuum: c.continuum,
                    phase_speed: c.phase_speed,
                });
            }
        }
    }
    let mut w = ctx.create("dispersion.csv")?;
    {
        let mut wr = csv::Writer::from_writer(&mut w);
        wr.write_record([
            "lattice", "m1", "m2", "m3", "polarization", "symbol", "rayleigh", "eigen_residual", "continuum", "phase_speed",
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
        for r in &rows {
            wr.write_record([
                r.lattice.to_string(),
                r.m1.to_string(),
                r.m2.to_string(),
                r.m3.to_string(),
                r.polarization.to_string(),
                format!("{:.16e}", r.symbol),
                format!("{:.16e}", r.rayleigh),
                format!("{:.16e}", r.eigen_residual),
                format!("{:.16e}", r.continuum),
                format!("{:.16e}", r.phase_speed),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        wr.flush()?;
    }
    w.flush()?;
    let speeds: Result<WaveSpeeds<f64>> = dispersion_speeds(&params, [1.0, 0.0, 0.0]);
    ctx.write_json(
        "dispersion.json",
        &DispersionSummary {
            p_speed: speeds.as_ref().ok().map(|s| s.p),
            s_speed: speeds.as_ref().ok().map(|s| s.s),
            speed_error: speeds.as_ref().err().map(|e| e.to_string()),
            rows: rows.len(),
        },
    )?;
    ctx.check(Check::from_margin(
        "dirichlet_rayleigh",
        1e-10 - worst_rq,
        format!("largest relative Rayleigh-quotient error {worst_rq:e}"),
    ));
    ctx.check(Check::from_margin(
        "periodic_eigenfield",
        1e-10 - worst_eig,
        format!("largest relative eigen residual {worst_eig:e}"),
    ));
    Ok(())
}

fn validate_experiment(ctx: &mut Context<'_>) -> Result<()> {
    let v = &ctx.cfg.validate;
    let report =
        validate_assumptions(&ctx.res.spec, &ctx.res.params, &ctx.res.grid, v.samples, v.radius, ctx.cfg.seed)?;
    ctx.write_json("validation.json", &report)?;
    for c in &report.checks {
        ctx.check(Check::flag(format!("nonlinearity:{}", c.id), c.pass, c.worst_margin - MARGIN_SLACK, c.description));
    }
    Ok(())
}
