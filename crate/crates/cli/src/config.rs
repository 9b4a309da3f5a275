//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "simulate"   # simulate | stationary | attractor | sweep | dispersion | validate
//! seed = 0
//!
//! [domain]
//! lengths = [1.0, 1.0, 1.0]
//! n = [6, 6, 6]
//!
//! [params]
//! mu = 1.0
//! eps = 1.0                 # or lambda = 0.0, never both
//! alpha = 2.0
//! rho = 1.0
//!
//! [forcing]
//! name = "cubic"
//! kappa = 1.0
//!
//! [load]
//! kind = "mode"             # zero | mode | file
//! m = [1, 1, 1]
//! amp = 20.0
//!
//! [time]
//! t_end = 5.0
//! dt = 0.01
//! ```
//!
//! Optional tables: `initial`, `stationary`, `attractor`, `dispersion`,
//! `validate`, `output`. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use lamelab::attractor::{EnsembleOptions, SampleOptions};
use lamelab::dynamics::{Problem, Scheme, State};
use lamelab::equilibria::MultistartOptions;
use lamelab::forcing::{catalog, CatalogParams, ForcingConstants, NonlinearitySpec};
use lamelab::mesh::{box_mode, io, random_low_mode_field, Grid, VectorField};
use lamelab::operators::LameParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{}field `{field}`: {message}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Field { field: String, line: Option<usize>, message: String },
}

impl ConfigError {
    fn field(text: &str, field: &str, message: impl fmt::Display) -> Self {
        ConfigError::Field { field: field.to_string(), line: locate(text, field), message: message.to_string() }
    }
}

/// 1-based line where the dotted key `field` is defined, if it can be found.
fn locate(text: &str, field: &str) -> Option<usize> {
    let (table, key) = match field.rsplit_once('.') {
        Some((t, k)) => (t, k),
        None => ("", field),
    };
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    table_line
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Stationary,
    Attractor,
    Sweep,
    Dispersion,
    Validate,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Simulate => "simulate",
            Experiment::Stationary => "stationary",
            Experiment::Attractor => "attractor",
            Experiment::Sweep => "sweep",
            Experiment::Dispersion => "dispersion",
            Experiment::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lengths: [f64; 3],
    pub n: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub alpha: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

/// Replacement values for the structural constants of a catalog entry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_f: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub name: String,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantOverrides>,
}

fn default_p() -> f64 {
    2.0
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadConfig {
    Zero,
    Mode {
        m: [usize; 3],
        amp: f64,
        #[serde(default = "x_axis")]
        direction: [f64; 3],
    },
    /// Field snapshot; `.csv` files use the CSV layout, anything else the binary one.
    File { path: PathBuf },
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Rest,
    Mode {
        m: [usize; 3],
        amp: f64,
        #[serde(default = "x_axis")]
        direction: [f64; 3],
        #[serde(default)]
        velocity_amp: f64,
    },
    /// Random smooth displacement and velocity, each with the given `amp` in max norm of the coefficients.
    Random {
        amp: f64,
        #[serde(default = "two_usize")]
        max_mode: usize,
    },
}

fn two_usize() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    #[serde(default = "two_usize")]
    pub max_mode: usize,
}

fn default_starts() -> usize {
    16
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self { n_starts: default_starts(), max_mode: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorConfig {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_transient")]
    pub t_transient: f64,
    #[serde(default = "two")]
    pub t_sample: f64,
    #[serde(default = "ten_usize")]
    pub stride: usize,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "five")]
    pub probe_t: f64,
    #[serde(default)]
    pub double_ensemble: bool,
}

fn default_ensemble() -> usize {
    32
}
fn default_amplitude() -> f64 {
    15.0
}
fn default_perturbation() -> f64 {
    0.1
}
fn default_transient() -> f64 {
    14.0
}
fn two() -> f64 {
    2.0
}
fn five() -> f64 {
    5.0
}
fn ten_usize() -> usize {
    10
}
fn default_eps_list() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.0]
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            ensemble_size: default_ensemble(),
            amplitude: default_amplitude(),
            perturbation: default_perturbation(),
            t_transient: default_transient(),
            t_sample: 2.0,
            stride: 10,
            eps_list: default_eps_list(),
            probe_t: 5.0,
            double_ensemble: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    /// Box modes checked on the Dirichlet grid and as plane waves on the periodic lattice.
    #[serde(default = "default_modes")]
    pub modes: Vec<[usize; 3]>,
}

fn default_modes() -> Vec<[usize; 3]> {
    vec![[1, 1, 1], [1, 1, 0], [2, 1, 1]]
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { modes: default_modes() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "ten")]
    pub radius: f64,
}

fn default_samples() -> usize {
    10_000
}
fn ten() -> f64 {
    10.0
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { samples: default_samples(), radius: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub field_format: FieldFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    pub params: ParamsConfig,
    pub forcing: ForcingConfig,
    #[serde(default = "zero_load")]
    pub load: LoadConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub stationary: StationaryConfig,
    #[serde(default)]
    pub attractor: AttractorConfig,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn zero_load() -> LoadConfig {
    LoadConfig::Zero
}

/// Everything the experiments need, built from a validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub grid: Grid<f64>,
    pub params: LameParams<f64>,
    pub spec: NonlinearitySpec<f64>,
    pub problem: Problem<f64>,
}

impl ExperimentConfig {
    /// Parses and validates; relative load paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<(Self, Resolved), ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        if let LoadConfig::File { path } = &mut cfg.load {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        let resolved = cfg.resolve(text)?;
        Ok((cfg, resolved))
    }

    pub fn load(path: &Path) -> Result<(Self, Resolved), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// ε from whichever of `lambda`/`eps` was given.
    pub fn eps(&self) -> f64 {
        match (self.params.eps, self.params.lambda) {
            (Some(e), _) => e,
            (None, Some(l)) => l + self.params.mu,
            (None, None) => f64::NAN,
        }
    }

    fn resolve(&self, text: &str) -> Result<Resolved, ConfigError> {
        let err = |field: &str, msg: &dyn fmt::Display| ConfigError::field(text, field, msg);
        let grid = Grid::new(self.domain.lengths, self.domain.n).map_err(|e| err("domain.n", &e))?;
        let p = &self.params;
        let eps = match (p.lambda, p.eps) {
            (Some(_), Some(_)) => return Err(err("params.lambda", &"give either `lambda` or `eps`, not both")),
            (None, None) => return Err(err("params.eps", &"one of `lambda` or `eps` is required")),
            _ => self.eps(),
        };
        let params = LameParams::from_eps(p.mu, eps, p.alpha, p.rho).map_err(|e| {
            let field = [("alpha", "params.alpha"), ("rho", "params.rho"), ("mu", "params.mu")]
                .into_iter()
                .find(|(k, _)| e.to_string().contains(&format!("{k} must")))
                .map_or(if p.eps.is_some() { "params.eps" } else { "params.lambda" }, |(_, f)| f);
            err(field, &e)
        })?;

        let f = &self.forcing;
        let mut spec = catalog(&f.name, CatalogParams { kappa: f.kappa, p: f.p, delta: f.delta })
            .map_err(|e| err("forcing.name", &e))?;
        if let Some(o) = &f.constants {
            let c = *spec.constants();
            spec = spec.with_constants(ForcingConstants {
                p: o.p.unwrap_or(c.p),
                m_g: o.m_g.unwrap_or(c.m_g),
                c_h: o.c_h.unwrap_or(c.c_h),
                m: o.m.unwrap_or(c.m),
                m_f: o.m_f.unwrap_or(c.m_f),
            });
        }

        let in_range = |m: &[usize; 3]| (0..3).all(|a| m[a] >= 1 && m[a] <= grid.n()[a]);
        let range_msg = format!("mode numbers must lie in 1..=n per axis, n = {:?}", grid.n());
        if let Some(InitialConfig::Mode { m, .. }) = &self.initial {
            if !in_range(m) {
                return Err(err("initial.m", &range_msg));
            }
        }
        let load = match &self.load {
            LoadConfig::Zero => VectorField::zeros(&grid),
            LoadConfig::Mode { m, amp, direction } => {
                if !in_range(m) {
                    return Err(err("load.m", &range_msg));
                }
                box_mode(&grid, *m, *direction, *amp).map_err(|e| err("load.m", &e))?
            }
            LoadConfig::File { path } => read_field(path, &grid).map_err(|e| err("load.path", &e))?,
        };
        let problem = Problem::new(params, spec, load).map_err(|e| err("load", &e))?;

        if let Some(t) = &self.time {
            if !(t.dt > 0.0 && t.dt.is_finite()) {
                return Err(err("time.dt", &format!("must be positive, got {}", t.dt)));
            }
            if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
                return Err(err("time.t_end", &format!("must be nonnegative, got {}", t.t_end)));
            }
            if t.stride == 0 {
                return Err(err("time.stride", &"must be >= 1"));
            }
        }
        if matches!(self.experiment, Experiment::Simulate | Experiment::Attractor | Experiment::Sweep)
            && self.time.is_none()
        {
            return Err(err("time", &format!("the {} experiment needs a [time] table", self.experiment)));
        }
        let a = &self.attractor;
        if matches!(self.experiment, Experiment::Attractor | Experiment::Sweep) {
            if a.ensemble_size == 0 {
                return Err(err("attractor.ensemble_size", &"must be >= 1"));
            }
            if !(a.t_transient > 0.0 && a.t_sample > 0.0) {
                return Err(err("attractor.t_transient", &"transient and sampling times must be positive"));
            }
            if a.stride == 0 {
                return Err(err("attractor.stride", &"must be >= 1"));
            }
        }
        if self.experiment == Experiment::Sweep {
            let l = &a.eps_list;
            if l.is_empty() || l.windows(2).any(|w| w[1] >= w[0]) || *l.last().unwrap() != 0.0 || l.iter().any(|e| *e < 0.0) {
                return Err(err("attractor.eps_list", &"must be strictly decreasing, nonnegative and end with 0"));
            }
        }
        if self.experiment == Experiment::Validate && !(self.validate.radius > 0.0) {
            return Err(err("validate.radius", &"must be positive"));
        }
        Ok(Resolved { grid, params, spec, problem })
    }

    pub fn time(&self) -> &TimeConfig {
        self.time.as_ref().expect("checked during validation")
    }

    pub fn initial_state(&self, grid: &Grid<f64>) -> lamelab::Result<State<f64>> {
        match self.initial.as_ref().unwrap_or(&InitialConfig::Rest) {
            InitialConfig::Rest => Ok(State::zeros(grid)),
            InitialConfig::Mode { m, amp, direction, velocity_amp } => {
                let u = box_mode(grid, *m, *direction, *amp)?;
                let v = box_mode(grid, *m, *direction, *velocity_amp)?;
                State::new(u, v, 0.0)
            }
            InitialConfig::Random { amp, max_mode } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let u = random_low_mode_field(grid, *max_mode, &mut rng).scaled(*amp);
                let v = random_low_mode_field(grid, *max_mode, &mut rng).scaled(*amp);
                State::new(u, v, 0.0)
            }
        }
    }

    pub fn multistart(&self) -> MultistartOptions {
        MultistartOptions {
            n_starts: self.stationary.n_starts,
            seed: self.seed,
            max_mode: self.stationary.max_mode,
            ..MultistartOptions::default()
        }
    }

    pub fn ensemble(&self) -> EnsembleOptions {
        let a = &self.attractor;
        EnsembleOptions {
            size: a.ensemble_size,
            seed: self.seed,
            amplitude: a.amplitude,
            max_mode: 2,
            perturbation: a.perturbation,
        }
    }

    pub fn sample(&self) -> SampleOptions {
        let a = &self.attractor;
        let t = self.time();
        SampleOptions { t_transient: a.t_transient, t_sample: a.t_sample, dt: t.dt, stride: a.stride, scheme: t.scheme }
    }
}

fn read_field(path: &Path, grid: &Grid<f64>) -> lamelab::Result<VectorField<f64>> {
    let file = std::fs::File::open(path)?;
    let field: VectorField<f64> = if path.extension().is_some_and(|e| e == "csv") {
        io::read_csv(std::io::BufReader::new(file))?
    } else {
        io::read_binary(std::io::BufReader::new(file))?
    };
    if field.grid().n() != grid.n() || field.grid().lengths() != grid.lengths() {
        return Err(lamelab::Error::GridMismatch(format!(
            "load field is on {:?} with lengths {:?}, the domain is {:?} with lengths {:?}",
            field.grid().n(),
            field.grid().lengths(),
            grid.n(),
            grid.lengths()
        )));
    }
    VectorField::from_data(grid, field.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "simulate"
seed = 3

[domain]
lengths = [1.0, 1.0, 1.0]
n = [3, 3, 3]

[params]
mu = 1.0
eps = 1.0
alpha = 2.0

[forcing]
name = "cubic"
kappa = 1.0

[load]
kind = "mode"
m = [1, 1, 1]
amp = 5.0

[time]
t_end = 1.0
dt = 0.01
"#;

    #[test]
    fn base_config_resolves() {
        let (cfg, r) = ExperimentConfig::parse(BASE, Path::new(".")).unwrap();
        assert_eq!(cfg.experiment, Experiment::Simulate);
        assert_eq!(r.params.eps(), 1.0);
        assert_eq!(r.params.rho(), 1.0);
        assert_eq!(r.spec.name(), "cubic");
        assert_eq!(cfg.time().stride, 1);
    }

    #[test]
    fn lambda_and_eps_are_exclusive() {
        let text = BASE.replace("eps = 1.0", "eps = 1.0\nlambda = 0.0");
        match ExperimentConfig::parse(&text, Path::new(".")).unwrap_err() {
            ConfigError::Field { field, line, .. } => {
                assert_eq!(field, "params.lambda");
                assert_eq!(line, Some(12));
            }
            other => panic!("{other}"),
        }
        let text = BASE.replace("eps = 1.0\n", "");
        assert!(matches!(ExperimentConfig::parse(&text, Path::new(".")), Err(ConfigError::Field { .. })));
        let text = BASE.replace("eps = 1.0", "lambda = 0.5");
        let (_, r) = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(r.params.eps(), 1.5);
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = BASE.replace("kappa = 1.0", "kappa = \"one\"");
        let msg = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("line 16"), "{msg}");
        let text = BASE.replace("kappa = 1.0", "kapa = 1.0");
        let msg = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("kapa") && msg.contains("line 16"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let cases = [
            ("dt = 0.01", "dt = -0.01", "time.dt"),
            ("name = \"cubic\"", "name = \"quartic\"", "forcing.name"),
            ("m = [1, 1, 1]", "m = [4, 1, 1]", "load.m"),
            ("n = [3, 3, 3]", "n = [0, 3, 3]", "domain.n"),
        ];
        for (from, to, field) in cases {
            let err = match ExperimentConfig::parse(&BASE.replace(from, to), Path::new(".")) {
                Err(e) => e,
                Ok(_) => panic!("{to} was accepted"),
            };
            let msg = err.to_string();
            assert!(msg.contains(field) && msg.contains("line "), "{msg}");
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let (cfg, _) = ExperimentConfig::parse(BASE, Path::new(".")).unwrap();
        let (again, _) = ExperimentConfig::parse(&cfg.to_toml(), Path::new(".")).unwrap();
        assert_eq!(cfg, again);
    }
}
