//! Batch front-end for lamelab: configuration files, experiment dispatch and
//! artifact emission.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lamelab::attractor::absorbing_radius;
use lamelab::dynamics::{bound_constants, Integrator};
use lamelab::operators::{first_eigenvalue, max_eigenvalue, WaveSpeeds};

pub use config::{ConfigError, ExperimentConfig};
pub use manifest::{Check, Manifest, Status};

/// Exit status for configuration errors.
pub const EXIT_CONFIG: u8 = 2;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `output.dir` of the configuration.
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Overrides `seed` of the configuration.
    pub seed: Option<u64>,
    pub checks: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot write to {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Output { .. } => Status::Error.exit_code(),
        }
    }
}

const DEFAULT_OUTPUT: &str = "lamelab-output";

/// Runs the experiment described by `config_path` and writes `manifest.json`
/// next to its artifacts.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let (mut cfg, resolved) = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts
        .output
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;

    let mut ctx = experiments::Context::new(&cfg, &resolved, &dir, opts.checks);
    let failure = experiments::run(&mut ctx);
    let status = Manifest::status_of(&ctx.checks, failure.as_ref());
    let manifest = Manifest {
        tool: "lamelab",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.to_string(),
        seed: cfg.seed,
        threads: opts.threads,
        checks_enabled: opts.checks,
        config: serde_json::to_value(&cfg).expect("configuration serializes"),
        wall_time_s: start.elapsed().as_secs_f64(),
        status,
        checks: ctx.checks,
        artifacts: ctx.artifacts,
        failure,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path).map_err(|source| CliError::Output { path, source })?;
    Ok(manifest)
}

/// Resolved configuration followed by the derived constants, without running anything.
pub fn describe(config_path: &Path) -> Result<String, ConfigError> {
    let (cfg, r) = ExperimentConfig::load(config_path)?;
    let mut out = String::new();
    out.push_str("# resolved configuration\n");
    out.push_str(&cfg.to_toml());
    out.push_str("\n# derived constants\n");
    let p = &r.params;
    let line = |out: &mut String, name: &str, value: String| {
        writeln!(out, "{name:<22} {value}").expect("writing to a String");
    };
    let fe = first_eigenvalue(&r.grid);
    line(&mut out, "lambda", format!("{:.6}", p.lambda()));
    line(&mut out, "eps", format!("{:.6}", p.eps()));
    line(&mut out, "lambda1_h", format!("{:.6}", fe.discrete));
    line(&mut out, "lambda1_continuum", format!("{:.6}", fe.continuum));
    let sb = max_eigenvalue(p, &r.grid, cfg.seed);
    line(&mut out, "Lambda_max_estimate", format!("{:.6}", sb.estimate));
    line(&mut out, "Lambda_max_upper", format!("{:.6}", sb.upper));
    line(&mut out, "cfl_dt_leapfrog", format!("{:.6e}", Integrator::cfl_limit(p, &r.grid)));
    line(&mut out, "a0", format!("{:.6}", p.mu().max(3.0 * p.eps())));
    match bound_constants(p, &r.spec, r.problem.load(), &r.grid) {
        Ok(k) => {
            line(&mut out, "K1", format!("{:.6e}", k.k1));
            line(&mut out, "K2", format!("{:.6e}", k.k2));
            line(&mut out, "K3", format!("{:.6e}", k.k3));
        }
        Err(e) => line(&mut out, "K1,K2,K3", format!("unavailable: {e}")),
    }
    match absorbing_radius(&r.problem) {
        Ok(a) => line(&mut out, "R1", format!("{:.6e}", a.r1)),
        Err(e) => line(&mut out, "R1", format!("unavailable: {e}")),
    }
    match WaveSpeeds::from_moduli(p.mu(), p.lambda(), p.rho()) {
        Ok(s) => {
            line(&mut out, "c_P", format!("{:.6}", s.p));
            line(&mut out, "c_S", format!("{:.6}", s.s));
            if s.p == s.s {
                out.push_str("c_P == c_S (lambda = -mu)\n");
            }
        }
        Err(e) => line(&mut out, "c_P,c_S", format!("unavailable: {e}")),
    }
    Ok(out)
}
