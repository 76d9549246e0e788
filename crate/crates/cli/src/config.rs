//! JSON experiment configuration: parsing, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use weakkam::critical::DEFAULT_SCHEDULE;
use weakkam::hamiltonian::builtin;
use weakkam::homogenize::HomogProblem;
use weakkam::mather::DEFAULT_HORIZONS;
use weakkam::stability::DEFAULT_ZETA_GRID;
use weakkam::{parse, Condition, HamiltonianSpec, Method, StepMode, Var};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Stationary,
    Critical,
    Ceps,
    Mather,
    Barrier,
    Stability,
    Instability,
    Corollary,
    Homogenize,
    ExampleEx,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::Evolve,
        Command::Stationary,
        Command::Critical,
        Command::Ceps,
        Command::Mather,
        Command::Barrier,
        Command::Stability,
        Command::Instability,
        Command::Corollary,
        Command::Homogenize,
        Command::ExampleEx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Stationary => "stationary",
            Command::Critical => "critical",
            Command::Ceps => "ceps",
            Command::Mather => "mather",
            Command::Barrier => "barrier",
            Command::Stability => "stability",
            Command::Instability => "instability",
            Command::Corollary => "corollary",
            Command::Homogenize => "homogenize",
            Command::ExampleEx => "example-ex",
        }
    }

    /// Commands that march the semigroup with the configured `dt`.
    pub(crate) fn steps_in_time(self) -> bool {
        matches!(
            self,
            Command::Evolve
                | Command::Stationary
                | Command::Stability
                | Command::Instability
                | Command::Corollary
                | Command::ExampleEx
                | Command::Ceps
        )
    }

    fn default_horizon(self) -> f64 {
        match self {
            Command::Evolve => 1.0,
            Command::Stationary | Command::Ceps => 200.0,
            Command::Critical => weakkam::critical::DEFAULT_HORIZON,
            Command::Stability | Command::ExampleEx => 16.0,
            Command::Instability => 10.0,
            Command::Corollary => 40.0,
            Command::Mather | Command::Barrier | Command::Homogenize => 0.0,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                format!(
                    "unknown command `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(rename = "dWu", default, skip_serializing_if = "Option::is_none")]
    pub dwu: Option<String>,
    #[serde(rename = "Lambda", default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    n: Option<usize>,
    m: Option<usize>,
    k: Option<usize>,
    dt: Option<f64>,
    tol: Option<f64>,
    vmax: Option<f64>,
    pmax: Option<f64>,
    #[serde(rename = "T")]
    t: Option<f64>,
    lambda_schedule: Option<Vec<f64>>,
    zeta_grid: Option<Vec<f64>>,
    eps_list: Option<Vec<f64>>,
    horizons: Option<Vec<f64>>,
    delta: Option<f64>,
    eps: Option<f64>,
    #[serde(rename = "Delta")]
    big_delta: Option<f64>,
    mode: Option<String>,
    direction: Option<String>,
    snap_every: Option<usize>,
    margin: Option<f64>,
    cross_tol: Option<f64>,
    method: Option<Method>,
    n_per_period: Option<usize>,
    property_trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleExConfig {
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default = "default_dphi")]
    pub dphi: String,
    #[serde(default = "default_half")]
    pub theta: f64,
    #[serde(default = "default_one")]
    pub zeta: f64,
}

fn default_phi() -> String {
    "sin(2*pi*x)/(2*pi)".into()
}
fn default_dphi() -> String {
    "cos(2*pi*x)".into()
}
fn default_half() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    hamiltonian: Option<HamiltonianConfig>,
    #[serde(default)]
    numerics: RawNumerics,
    phi0: Option<String>,
    u_minus: Option<String>,
    a: Option<String>,
    condition: Option<Condition>,
    #[serde(rename = "H")]
    h: Option<String>,
    #[serde(rename = "dHu")]
    dhu: Option<String>,
    #[serde(rename = "Lambda1")]
    lambda1: Option<f64>,
    #[serde(rename = "Lambda2")]
    lambda2: Option<f64>,
    example_ex: Option<ExampleExConfig>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
}

/// Numerical parameters with every default filled in for the command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics {
    pub n: usize,
    pub m: usize,
    /// Momentum samples of the discrete Legendre transform.
    pub k: usize,
    /// `None` means the node-aligned step chosen by the solver.
    pub dt: Option<f64>,
    pub tol: f64,
    pub vmax: f64,
    pub pmax: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub lambda_schedule: Vec<f64>,
    pub zeta_grid: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub horizons: Vec<f64>,
    pub delta: f64,
    pub eps: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub mode: StepMode,
    pub direction: weakkam::Direction,
    pub snap_every: usize,
    pub margin: f64,
    pub cross_tol: f64,
    pub method: Method,
    pub n_per_period: usize,
    pub property_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogConfig {
    #[serde(rename = "H")]
    pub h: String,
    #[serde(rename = "dHu")]
    pub dhu: String,
    #[serde(rename = "Lambda1")]
    pub lambda1: f64,
    #[serde(rename = "Lambda2")]
    pub lambda2: f64,
}

/// A validated experiment. Serializes to the header recorded in every
/// artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianConfig>,
    /// The expanded spec (formulas, bound and truncation).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<HamiltonianSpec>,
    pub numerics: Numerics,
    pub phi0: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_minus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogenize: Option<HomogConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example_ex: Option<ExampleExConfig>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn spec(&self) -> &HamiltonianSpec {
        self.spec
            .as_ref()
            .expect("validated configs of this command carry a spec")
    }

    pub fn homog_problem(&self) -> Result<HomogProblem, ConfigError> {
        let h = self
            .homogenize
            .as_ref()
            .ok_or_else(|| invalid("H", "required by homogenize"))?;
        HomogProblem::from_strs(&h.h, &h.dhu, h.lambda1, h.lambda2)
            .map_err(|e| invalid("H", e.to_string()))
    }

    /// Time step for semigroup marches.
    pub fn dt(&self) -> f64 {
        self.numerics.dt.unwrap_or(DEFAULT_DT)
    }

    /// One-line JSON used as the artifact header.
    pub fn header_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub const DEFAULT_DT: f64 = 1e-3;

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    load_config_for(path, None)
}

/// Reads `path`; `command` (from the command line) must agree with the
/// file's `command` key when both are present.
pub fn load_config_for(
    path: &Path,
    command: Option<Command>,
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, command)
}

pub fn parse_config(text: &str, command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve(raw, command)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn positive_list(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(invalid(key, "must not be empty"));
    }
    for &x in v {
        positive(key, x)?;
    }
    Ok(())
}

fn formula(key: &str, src: &str, vars: &[Var]) -> Result<(), ConfigError> {
    let e = parse(src).map_err(|e| invalid(key, e.to_string()))?;
    e.check_vars(vars).map_err(|e| invalid(key, e.to_string()))
}

fn param_string(key: &str, v: &serde_json::Value) -> Result<String, ConfigError> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        _ => Err(invalid(
            &format!("params.{key}"),
            "must be a formula string or a number",
        )),
    }
}

fn build_spec(h: &HamiltonianConfig, vmax: f64, pmax: f64) -> Result<HamiltonianSpec, ConfigError> {
    let spec = if let Some(name) = &h.builtin {
        if h.g.is_some() || h.w.is_some() || h.dwu.is_some() || h.lambda.is_some() {
            return Err(invalid(
                "hamiltonian",
                "give either `builtin` + `params` or `G`/`W`/`dWu`/`Lambda`, not both",
            ));
        }
        let params = h
            .params
            .iter()
            .map(|(k, v)| Ok((k.clone(), param_string(k, v)?)))
            .collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
        builtin(name, &params).map_err(|e| invalid("hamiltonian", e.to_string()))?
    } else {
        if !h.params.is_empty() {
            return Err(invalid("params", "only used together with `builtin`"));
        }
        let g = h.g.as_deref().ok_or_else(|| invalid("G", "required"))?;
        let w = h.w.as_deref().unwrap_or("0");
        let dwu = h.dwu.as_deref().unwrap_or("0");
        let lambda = h.lambda.unwrap_or(0.0);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("Lambda", "must be finite and nonnegative"));
        }
        HamiltonianSpec::from_strs(g, w, dwu, lambda, vmax, pmax)
            .map_err(|e| invalid("hamiltonian", e.to_string()))?
    };
    Ok(spec.with_truncation(vmax, pmax))
}

fn example_spec(
    ex: &ExampleExConfig,
    vmax: f64,
    pmax: f64,
) -> Result<HamiltonianSpec, ConfigError> {
    let params = [
        ("phi", ex.phi.clone()),
        ("dphi", ex.dphi.clone()),
        ("theta", ex.theta.to_string()),
        ("zeta", ex.zeta.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(builtin("example_ex", &params)
        .map_err(|e| invalid("example_ex", e.to_string()))?
        .with_truncation(vmax, pmax))
}

fn resolve(raw: RawConfig, cli_command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let file_command = raw
        .command
        .as_deref()
        .map(|s| s.parse::<Command>().map_err(|e| invalid("command", e)))
        .transpose()?;
    let command = match (cli_command, file_command) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid(
                "command",
                format!("config says `{b}` but `{a}` was requested"),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(invalid("command", "required")),
    };

    let r = raw.numerics;
    let homog = command == Command::Homogenize;
    let wide = if homog { 6.0 } else { 4.0 };
    let numerics = Numerics {
        n: r.n.unwrap_or(256),
        m: r.m.unwrap_or(64),
        k: r.k.unwrap_or(64),
        dt: match r.dt {
            Some(dt) => Some(positive("dt", dt)?),
            None if command.steps_in_time() => Some(DEFAULT_DT),
            None => None,
        },
        tol: positive("tol", r.tol.unwrap_or(1e-6))?,
        vmax: positive("vmax", r.vmax.unwrap_or(wide))?,
        pmax: positive("pmax", r.pmax.unwrap_or(wide))?,
        horizon: r.t.unwrap_or(command.default_horizon()),
        lambda_schedule: r
            .lambda_schedule
            .unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec()),
        zeta_grid: r.zeta_grid.unwrap_or_else(|| DEFAULT_ZETA_GRID.to_vec()),
        eps_list: r.eps_list.unwrap_or_else(|| {
            if homog {
                vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            } else {
                vec![-0.04, -0.02, 0.0, 0.02, 0.04]
            }
        }),
        horizons: r.horizons.unwrap_or_else(|| DEFAULT_HORIZONS.to_vec()),
        delta: positive("delta", r.delta.unwrap_or(0.05))?,
        eps: positive("eps", r.eps.unwrap_or(0.01))?,
        big_delta: positive("Delta", r.big_delta.unwrap_or(0.5))?,
        mode: match r.mode.as_deref().unwrap_or("explicit") {
            "explicit" => StepMode::Explicit,
            "picard" => StepMode::Picard,
            other => {
                return Err(invalid(
                    "mode",
                    format!("`{other}` is not explicit or picard"),
                ))
            }
        },
        direction: match r.direction.as_deref().unwrap_or("backward") {
            "backward" => weakkam::Direction::Backward,
            "forward" => weakkam::Direction::Forward,
            other => {
                return Err(invalid(
                    "direction",
                    format!("`{other}` is not backward or forward"),
                ))
            }
        },
        snap_every: r.snap_every.unwrap_or(100).max(1),
        margin: positive(
            "margin",
            r.margin.unwrap_or(weakkam::stability::DEFAULT_MARGIN),
        )?,
        cross_tol: positive(
            "cross_tol",
            r.cross_tol.unwrap_or(weakkam::critical::DEFAULT_CROSS_TOL),
        )?,
        method: r.method.unwrap_or_default(),
        n_per_period: r.n_per_period.unwrap_or(32),
        property_trials: r.property_trials.unwrap_or(0),
    };
    if numerics.n < 8 {
        return Err(invalid(
            "n",
            format!("need at least 8 nodes, got {}", numerics.n),
        ));
    }
    if numerics.m < 16 || numerics.k < 16 {
        return Err(invalid("m", "m and k must be at least 16"));
    }
    if command.default_horizon() > 0.0 || r.t.is_some() {
        positive("T", numerics.horizon)?;
    }
    positive_list("lambda_schedule", &numerics.lambda_schedule)?;
    positive_list("zeta_grid", &numerics.zeta_grid)?;
    positive_list("horizons", &numerics.horizons)?;
    if numerics.n_per_period < 2 {
        return Err(invalid("n_per_period", "must be at least 2"));
    }
    if command == Command::Instability && numerics.eps >= numerics.big_delta {
        return Err(invalid("eps", "must be smaller than Delta"));
    }

    let phi0 = raw.phi0.unwrap_or_else(|| "0".into());
    formula("phi0", &phi0, &[Var::X])?;
    if let Some(u) = &raw.u_minus {
        formula("u_minus", u, &[Var::X])?;
    }
    if let Some(a) = &raw.a {
        formula("a", a, &[Var::X])?;
    }

    let mut example_ex = None;
    let mut homogenize = None;
    let spec = match command {
        Command::Homogenize => {
            if raw.hamiltonian.is_some() {
                return Err(invalid(
                    "hamiltonian",
                    "homogenize takes `H` and `dHu` instead",
                ));
            }
            let h = raw
                .h
                .ok_or_else(|| invalid("H", "required by homogenize"))?;
            let lambda1 = raw
                .lambda1
                .ok_or_else(|| invalid("Lambda1", "required by homogenize"))?;
            let hc = HomogConfig {
                h,
                dhu: raw
                    .dhu
                    .ok_or_else(|| invalid("dHu", "required by homogenize"))?,
                lambda1,
                lambda2: raw.lambda2.unwrap_or(lambda1),
            };
            for &eps in &numerics.eps_list {
                let k = 1.0 / eps;
                if !(eps > 0.0 && (k - k.round()).abs() < 1e-9) {
                    return Err(invalid(
                        "eps_list",
                        format!("{eps} is not 1/k for an integer k"),
                    ));
                }
            }
            HomogProblem::from_strs(&hc.h, &hc.dhu, hc.lambda1, hc.lambda2)
                .map_err(|e| invalid("H", e.to_string()))?;
            homogenize = Some(hc);
            None
        }
        Command::ExampleEx => {
            if raw.hamiltonian.is_some() {
                return Err(invalid(
                    "hamiltonian",
                    "example-ex builds its own Hamiltonian",
                ));
            }
            let ex = raw.example_ex.unwrap_or(ExampleExConfig {
                phi: default_phi(),
                dphi: default_dphi(),
                theta: 0.5,
                zeta: 1.0,
            });
            let spec = example_spec(&ex, numerics.vmax, numerics.pmax)?;
            example_ex = Some(ex);
            Some(spec)
        }
        _ => {
            let h = raw
                .hamiltonian
                .as_ref()
                .ok_or_else(|| invalid("hamiltonian", "required"))?;
            Some(build_spec(h, numerics.vmax, numerics.pmax)?)
        }
    };

    if let (Some(spec), Some(dt)) = (&spec, numerics.dt) {
        check_step(dt, spec.lambda_bound, numerics.vmax)?;
    }
    if let Some(hc) = &homogenize {
        if let Some(dt) = r.dt {
            check_step(dt, hc.lambda1.abs().max(hc.lambda2.abs()), numerics.vmax)?;
        }
    }

    Ok(ExperimentConfig {
        command,
        hamiltonian: raw.hamiltonian,
        spec,
        numerics,
        phi0,
        u_minus: raw.u_minus,
        a: raw.a,
        condition: raw.condition.unwrap_or(Condition::A3),
        homogenize,
        example_ex,
        output_dir: raw
            .output_dir
            .unwrap_or_else(|| PathBuf::from("weakkam-out")),
        seed: raw.seed.unwrap_or(0),
    })
}

fn check_step(dt: f64, lambda: f64, vmax: f64) -> Result<(), ConfigError> {
    if dt * lambda > 0.5 {
        return Err(invalid(
            "dt",
            format!("dt*Lambda exceeds 1/2 (dt = {dt}, Lambda = {lambda})"),
        ));
    }
    if dt * vmax > 0.5 {
        return Err(invalid(
            "dt",
            format!("dt*vmax exceeds half the period (dt = {dt}, vmax = {vmax})"),
        ));
    }
    Ok(())
}
