//! Scenario configuration: TOML parsing, defaults and range checks.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use affobs_core::gd_estimator::{GdConfig, DEFAULT_GAMMA, DEFAULT_GAMMA_G};
use affobs_core::ltv_system::{finite_window_rotor, rotor, scalar_drift, LtvSystem, TabulatedSystem};
use serde::Deserialize;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_KB_Q: f64 = 0.0;
pub const DEFAULT_KB_R: f64 = 1.0;
pub const DEFAULT_KB_P0_SCALE: f64 = 1.0;

/// A violated constraint, tagged with the offending key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    table: Option<PathBuf>,
    x0: Vec<f64>,
    xi0: Option<Vec<f64>>,
    gamma_g: Option<f64>,
    gamma: Option<f64>,
    theta_g0: Option<Vec<f64>>,
    theta0: Option<Vec<f64>>,
    dt: Option<f64>,
    t_final: f64,
    uco_window: Option<f64>,
    disturbance: Option<RawDisturbance>,
    baseline: Option<RawBaseline>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    amplitude: f64,
    kind: String,
    frequency: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaseline {
    enabled: Option<bool>,
    q: Option<f64>,
    r: Option<f64>,
    p0_scale: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Scenario {
    ScalarDrift,
    Rotor,
    FiniteWindowRotor,
    Table {
        path: PathBuf,
        system: Arc<TabulatedSystem>,
    },
}

impl Scenario {
    pub fn id(&self) -> &'static str {
        match self {
            Scenario::ScalarDrift => "S1",
            Scenario::Rotor => "S2",
            Scenario::FiniteWindowRotor => "S3",
            Scenario::Table { .. } => "S4",
        }
    }

    pub fn system(&self) -> Arc<dyn LtvSystem> {
        match self {
            Scenario::ScalarDrift => Arc::new(scalar_drift()),
            Scenario::Rotor => Arc::new(rotor()),
            Scenario::FiniteWindowRotor => Arc::new(finite_window_rotor()),
            Scenario::Table { system, .. } => system.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Scenario::ScalarDrift => 1,
            Scenario::Rotor | Scenario::FiniteWindowRotor => 2,
            Scenario::Table { system, .. } => system.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisturbanceKind {
    /// Independent `N(0, amplitude²)` draws, one per grid step.
    Gaussian { seed: u64 },
    /// `amplitude · sin(2π·frequency·t)`.
    Sinusoid { frequency: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Disturbance {
    pub amplitude: f64,
    pub kind: DisturbanceKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub q: f64,
    pub r: f64,
    pub p0_scale: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            q: DEFAULT_KB_Q,
            r: DEFAULT_KB_R,
            p0_scale: DEFAULT_KB_P0_SCALE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
    pub gd: GdConfig,
    pub dt: f64,
    pub t_final: f64,
    /// Window length for the UCO check; defaults to `t_final / 4`.
    pub uco_window: f64,
    pub disturbance: Option<Disturbance>,
    /// `None` disables the Kalman-Bucy comparison.
    pub baseline: Option<BaselineConfig>,
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// Defaults for a built-in scenario with the given initial state.
    pub fn builtin(scenario: Scenario, x0: Vec<f64>, t_final: f64) -> Self {
        let n = x0.len();
        ScenarioConfig {
            scenario,
            xi0: vec![0.0; n],
            gd: GdConfig::with_defaults(n),
            x0,
            dt: DEFAULT_DT,
            t_final,
            uco_window: t_final / 4.0,
            disturbance: None,
            baseline: Some(BaselineConfig::default()),
            output_dir: None,
        }
    }
}

/// Parses and checks a TOML scenario description. Relative `table` and
/// `output_dir` paths are resolved against `base_dir`.
pub fn validate_config(raw: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(raw).map_err(|e| {
        let msg = e.message().to_string();
        let field = unknown_field(&msg).unwrap_or_else(|| "<document>".into());
        ConfigError::new(field, msg)
    })?;
    let resolve = |p: PathBuf| match base_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    };

    let scenario = match raw.scenario.as_str() {
        "S1" => Scenario::ScalarDrift,
        "S2" => Scenario::Rotor,
        "S3" => Scenario::FiniteWindowRotor,
        "S4" => {
            let path = resolve(
                raw.table
                    .clone()
                    .ok_or_else(|| ConfigError::new("table", "scenario S4 needs a table path"))?,
            );
            let system = TabulatedSystem::from_path(&path)
                .map_err(|e| ConfigError::new("table", format!("{}: {e}", path.display())))?;
            Scenario::Table {
                path,
                system: Arc::new(system),
            }
        }
        other => {
            return Err(ConfigError::new(
                "scenario",
                format!("unknown scenario `{other}` (expected S1, S2, S3 or S4)"),
            ))
        }
    };
    if raw.table.is_some() && !matches!(scenario, Scenario::Table { .. }) {
        return Err(ConfigError::new("table", "only scenario S4 takes a table"));
    }

    let n = scenario.dim();
    let vector = |field: &str, v: Option<Vec<f64>>| -> Result<Vec<f64>, ConfigError> {
        let v = v.unwrap_or_else(|| vec![0.0; n]);
        if v.len() != n {
            return Err(ConfigError::new(
                field,
                format!("expected {n} entries, found {}", v.len()),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::new(field, "entries must be finite"));
        }
        Ok(v)
    };
    let x0 = vector("x0", Some(raw.x0))?;
    let xi0 = vector("xi0", raw.xi0)?;
    let theta_g0 = vector("theta_g0", raw.theta_g0)?;
    let theta0 = vector("theta0", raw.theta0)?;

    let gamma_g = positive("gamma_g", raw.gamma_g.unwrap_or(DEFAULT_GAMMA_G))?;
    let gamma = positive("gamma", raw.gamma.unwrap_or(DEFAULT_GAMMA))?;
    let dt = positive("dt", raw.dt.unwrap_or(DEFAULT_DT))?;
    let t_final = positive("t_final", raw.t_final)?;
    if dt > t_final {
        return Err(ConfigError::new("dt", "must not exceed t_final"));
    }
    if let Scenario::Table { system, .. } = &scenario {
        system
            .check_span(0.0, t_final)
            .map_err(|e| ConfigError::new("t_final", e.to_string()))?;
    }
    let uco_window = match raw.uco_window {
        Some(w) => {
            let w = positive("uco_window", w)?;
            if w > t_final {
                return Err(ConfigError::new("uco_window", "must not exceed t_final"));
            }
            w
        }
        None => t_final / 4.0,
    };

    let disturbance = raw.disturbance.map(parse_disturbance).transpose()?;
    let baseline = match raw.baseline {
        None => Some(BaselineConfig::default()),
        Some(b) if b.enabled == Some(false) => None,
        Some(b) => {
            let q = b.q.unwrap_or(DEFAULT_KB_Q);
            if !(q >= 0.0) || !q.is_finite() {
                return Err(ConfigError::new("baseline.q", "must be >= 0"));
            }
            Some(BaselineConfig {
                q,
                r: positive("baseline.r", b.r.unwrap_or(DEFAULT_KB_R))?,
                p0_scale: positive("baseline.p0_scale", b.p0_scale.unwrap_or(DEFAULT_KB_P0_SCALE))?,
            })
        }
    };

    Ok(ScenarioConfig {
        scenario,
        x0,
        xi0,
        gd: GdConfig {
            gamma_g,
            gamma,
            theta_g0,
            theta0,
        },
        dt,
        t_final,
        uco_window,
        disturbance,
        baseline,
        output_dir: raw.output_dir.map(resolve),
    })
}

/// Reads and validates a config file; relative paths inside it are taken
/// relative to the file's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
    validate_config(&text, path.parent())
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be > 0, got {v}")))
    }
}

fn parse_disturbance(d: RawDisturbance) -> Result<Disturbance, ConfigError> {
    if !(d.amplitude >= 0.0) || !d.amplitude.is_finite() {
        return Err(ConfigError::new("disturbance.amplitude", "must be >= 0"));
    }
    let kind = match d.kind.as_str() {
        "gaussian" => DisturbanceKind::Gaussian {
            seed: d
                .seed
                .ok_or_else(|| ConfigError::new("disturbance.seed", "required for gaussian disturbances"))?,
        },
        "sinusoid" => {
            let frequency = d.frequency.ok_or_else(|| {
                ConfigError::new("disturbance.frequency", "required for sinusoid disturbances")
            })?;
            if !frequency.is_finite() {
                return Err(ConfigError::new("disturbance.frequency", "must be finite"));
            }
            DisturbanceKind::Sinusoid { frequency }
        }
        other => {
            return Err(ConfigError::new(
                "disturbance.kind",
                format!("unknown kind `{other}` (expected gaussian or sinusoid)"),
            ))
        }
    };
    Ok(Disturbance {
        amplitude: d.amplitude,
        kind,
    })
}

/// Pulls the key name out of serde's "unknown field `x`" / "missing field `x`".
fn unknown_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}
