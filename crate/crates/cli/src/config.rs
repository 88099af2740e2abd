//! Experiment configuration: JSON parsing, defaults and validation.
//!
//! Validation walks the raw JSON tree so that every problem is reported at
//! once with its field path, rather than stopping at the first bad field.

use std::fmt;
use std::path::PathBuf;

use landscape_lab::channels::{Dissipator, LindbladModel};
use landscape_lab::classical::{Distribution, RandomFunction};
use landscape_lab::entropy::EntropyFamily;
use landscape_lab::landscape::{AscentConfig, FixtureConfig};
use landscape_lab::linalg::{CMatrix, MatrixJson};
use landscape_lab::objectives::ObjectiveSpec;
use landscape_lab::quantum::{DensityMatrix, Observable};
use landscape_lab::{Regime, State};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Optimize,
    ProbeConcavity,
    LevelSet,
    RankCheck,
    FalseTrap,
    RealTrap,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Optimize,
        Command::ProbeConcavity,
        Command::LevelSet,
        Command::RankCheck,
        Command::FalseTrap,
        Command::RealTrap,
        Command::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::ProbeConcavity => "probe-concavity",
            Command::LevelSet => "level-set",
            Command::RankCheck => "rank-check",
            Command::FalseTrap => "false-trap",
            Command::RealTrap => "real-trap",
            Command::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Top-level sections this command reads, besides command, seed and output.
    fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Optimize => &["spec", "map", "run"],
            Command::ProbeConcavity => &["spec", "probe"],
            Command::LevelSet => &["spec", "levelSet"],
            Command::RankCheck => &["spec", "map", "rankCheck"],
            Command::FalseTrap | Command::RealTrap => &["fixture"],
            Command::Oracle => &["spec"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FieldError {
    pub field_path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.field_path.is_empty() {
            "(root)"
        } else {
            &self.field_path
        };
        write!(f, "{path}: {}", self.message)
    }
}

/// Fully resolved configuration; every default is materialized.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ObjectiveSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_set: Option<LevelSetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_check: Option<RankCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureConfig>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Preset {
    MaximallyMixed,
    Uniform,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum InitialState {
    Preset(Preset),
    Explicit(State),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MapConfig {
    #[serde(rename_all = "camelCase")]
    Kinematic {
        dim: usize,
        rank: usize,
        initial_state: InitialState,
    },
    #[serde(rename_all = "camelCase")]
    Stochastic {
        cells: usize,
        initial_distribution: InitialState,
    },
    #[serde(rename_all = "camelCase")]
    Lindblad {
        model: LindbladModel,
        t0: f64,
        t1: f64,
        steps: usize,
        initial_state: InitialState,
    },
}

impl MapConfig {
    pub fn regime(&self) -> Regime {
        match self {
            MapConfig::Stochastic { .. } => Regime::Classical,
            _ => Regime::Quantum,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapConfig::Kinematic { dim, .. } => *dim,
            MapConfig::Stochastic { cells, .. } => *cells,
            MapConfig::Lindblad { model, .. } => model.dim(),
        }
    }

    /// Step size at which ascent on this chart is well scaled.
    fn default_step(&self) -> f64 {
        match self {
            MapConfig::Kinematic { dim, rank, .. } => (2 * dim * rank) as f64,
            MapConfig::Stochastic { .. } => 10.0,
            MapConfig::Lindblad { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub n_starts: usize,
    pub value_tol: f64,
    /// Classify every terminal point with the projected Hessian.
    pub classify: bool,
    pub ascent: AscentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeConfig {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelSetConfig {
    pub pairs: usize,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<[State; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RankCheckConfig {
    pub points: usize,
    pub fd_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write `<command>-<seed>.trajectories.csv`.
    pub csv: bool,
    /// Keep every k-th trajectory point (the last point is always kept).
    pub trajectory_stride: usize,
}

const TOP_LEVEL: &[&str] = &[
    "command",
    "seed",
    "spec",
    "map",
    "run",
    "probe",
    "levelSet",
    "rankCheck",
    "fixture",
    "output",
];

/// Parses and resolves a config. `requested` is the command named on the
/// command line; `seed` overrides the config seed.
pub fn validate(
    text: &[u8],
    requested: Option<Command>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, Vec<FieldError>> {
    let root: Value = serde_json::from_slice(text).map_err(|e| {
        vec![FieldError {
            field_path: String::new(),
            message: format!("not valid JSON: {e}"),
        }]
    })?;
    let mut v = Validator::default();
    let Some(obj) = root.as_object() else {
        v.err("", "config must be a JSON object");
        return Err(v.errors);
    };
    v.unknown_keys(obj, "", TOP_LEVEL);

    let command = resolve_command(&mut v, obj, requested);
    let seed = match (seed, obj.get("seed")) {
        (Some(s), _) => Some(s),
        (None, Some(x)) => match x.as_u64() {
            Some(s) => Some(s),
            None => {
                v.err(
                    "seed",
                    format!("must be a non-negative 64-bit integer, got {x}"),
                );
                None
            }
        },
        (None, None) => {
            v.err("seed", "required: set it in the config or pass --seed");
            None
        }
    };
    let output = v.output(obj.get("output"));
    let Some(command) = command else {
        return Err(v.errors);
    };
    for key in TOP_LEVEL[2..].iter().filter(|k| **k != "output") {
        if obj.contains_key(*key) && !command.sections().contains(key) {
            v.err(*key, format!("not used by the {command} command"));
        }
    }

    let uses = |s: &str| command.sections().contains(&s);
    let needs_spec = !matches!(
        command,
        Command::RankCheck | Command::FalseTrap | Command::RealTrap
    );
    let spec = match obj.get("spec") {
        Some(x) if uses("spec") => v.spec(x),
        None if needs_spec => {
            v.err("spec", format!("required by the {command} command"));
            None
        }
        _ => None,
    };

    let mut cfg = ExperimentConfig {
        command,
        seed: seed.unwrap_or(0),
        spec: spec.clone(),
        map: None,
        run: None,
        probe: None,
        level_set: None,
        rank_check: None,
        fixture: None,
        output,
    };
    match command {
        Command::Optimize | Command::RankCheck => {
            cfg.map = v.map(obj.get("map"), spec.as_ref(), command);
            if command == Command::Optimize {
                let step = cfg.map.as_ref().map_or(1.0, MapConfig::default_step);
                cfg.run = Some(v.run(obj.get("run"), step, cfg.seed));
            } else {
                cfg.rank_check = Some(v.rank_check(obj.get("rankCheck")));
            }
        }
        Command::ProbeConcavity => {
            let mut s = v.section(obj.get("probe"), "probe", &["samples"]);
            cfg.probe = Some(ProbeConfig {
                samples: s.count(&mut v, "samples", 10_000, 1),
            });
        }
        Command::LevelSet => {
            if let Some(sp) = &spec {
                if !sp.is_linear() {
                    v.err("spec.kind", "level-set needs a typeOne objective");
                }
            }
            cfg.level_set = Some(v.level_set(obj.get("levelSet"), spec.as_ref()));
        }
        Command::FalseTrap | Command::RealTrap => {
            let base = if command == Command::RealTrap {
                FixtureConfig::dynamic()
            } else {
                FixtureConfig::default()
            };
            cfg.fixture = Some(v.fixture(obj.get("fixture"), base, cfg.seed));
        }
        Command::Oracle => {}
    }

    if v.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(v.errors)
    }
}

fn resolve_command(
    v: &mut Validator,
    obj: &Map<String, Value>,
    requested: Option<Command>,
) -> Option<Command> {
    let valid = || Command::ALL.map(Command::name).join(", ");
    let from_config = match obj.get("command") {
        None => None,
        Some(Value::String(s)) => match Command::parse(s) {
            Some(c) => Some(c),
            None => {
                v.err(
                    "command",
                    format!("unknown command \"{s}\"; expected one of {}", valid()),
                );
                return None;
            }
        },
        Some(other) => {
            v.err("command", format!("must be a string, got {other}"));
            return None;
        }
    };
    match (from_config, requested) {
        (Some(c), Some(r)) if c != r => {
            v.err(
                "command",
                format!("config is for {c} but {r} was requested"),
            );
            None
        }
        (Some(c), _) | (None, Some(c)) => Some(c),
        (None, None) => {
            v.err("command", format!("required; expected one of {}", valid()));
            None
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn describe(e: serde_json::Error) -> String {
    let s = e.to_string();
    // serde_json appends " at line X column Y" for parse errors; values have no position.
    match s.find(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

/// An optional JSON object under `path`. Missing sections read as empty.
struct Section<'a> {
    path: String,
    obj: Option<&'a Map<String, Value>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.obj.and_then(|o| o.get(key))
    }

    fn count(&mut self, v: &mut Validator, key: &str, default: usize, min: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(x) => match x.as_u64() {
                Some(n) if n as usize >= min => n as usize,
                _ => {
                    v.err(
                        join(&self.path, key),
                        format!("must be an integer >= {min}, got {x}"),
                    );
                    default
                }
            },
        }
    }

    fn positive(&mut self, v: &mut Validator, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(x) => match x.as_f64() {
                Some(f) if f.is_finite() && f > 0.0 => f,
                _ => {
                    v.err(
                        join(&self.path, key),
                        format!("must be a positive number, got {x}"),
                    );
                    default
                }
            },
        }
    }

    fn number(&mut self, v: &mut Validator, key: &str, default: Option<f64>) -> Option<f64> {
        match self.get(key) {
            None => {
                if default.is_none() {
                    v.err(join(&self.path, key), "required");
                }
                default
            }
            Some(x) => match x.as_f64() {
                Some(f) if f.is_finite() => Some(f),
                _ => {
                    v.err(
                        join(&self.path, key),
                        format!("must be a finite number, got {x}"),
                    );
                    default
                }
            },
        }
    }

    fn flag(&mut self, v: &mut Validator, key: &str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(x) => {
                v.err(
                    join(&self.path, key),
                    format!("must be true or false, got {x}"),
                );
                default
            }
        }
    }

    fn parse<T: DeserializeOwned>(&self, v: &mut Validator, key: &str) -> Option<T> {
        let x = self.get(key)?;
        match serde_json::from_value(x.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                v.err(join(&self.path, key), describe(e));
                None
            }
        }
    }
}

impl Validator {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field_path: path.into(),
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in obj.keys().filter(|k| !allowed.contains(&k.as_str())) {
            self.err(join(path, key), "unknown field");
        }
    }

    fn section<'a>(
        &mut self,
        value: Option<&'a Value>,
        path: &str,
        allowed: &[&str],
    ) -> Section<'a> {
        let obj = match value {
            None => None,
            Some(Value::Object(o)) => {
                self.unknown_keys(o, path, allowed);
                Some(o)
            }
            Some(other) => {
                self.err(path, format!("must be an object, got {other}"));
                None
            }
        };
        Section {
            path: path.to_string(),
            obj,
        }
    }

    fn output(&mut self, value: Option<&Value>) -> OutputConfig {
        let mut s = self.section(value, "output", &["dir", "csv", "trajectoryStride"]);
        let dir = match s.get("dir") {
            None => PathBuf::from("."),
            Some(Value::String(d)) if !d.is_empty() => PathBuf::from(d),
            Some(x) => {
                self.err(
                    "output.dir",
                    format!("must be a non-empty path string, got {x}"),
                );
                PathBuf::from(".")
            }
        };
        OutputConfig {
            dir,
            csv: s.flag(self, "csv", false),
            trajectory_stride: s.count(self, "trajectoryStride", 1, 1),
        }
    }

    fn spec(&mut self, value: &Value) -> Option<ObjectiveSpec> {
        let before = self.errors.len();
        let s = self.section(
            Some(value),
            "spec",
            &["regime", "kind", "observable", "temperature", "entropy"],
        );
        s.obj?;
        let regime = match s.get("regime").and_then(Value::as_str) {
            Some("quantum") => Some(Regime::Quantum),
            Some("classical") => Some(Regime::Classical),
            None if s.get("regime").is_none() => {
                self.err("spec.regime", "required: \"quantum\" or \"classical\"");
                None
            }
            _ => {
                self.err("spec.regime", "must be \"quantum\" or \"classical\"");
                None
            }
        };
        let type_two = match s.get("kind").and_then(Value::as_str) {
            Some("typeOne") => Some(false),
            Some("typeTwo") => Some(true),
            None if s.get("kind").is_none() => {
                self.err("spec.kind", "required: \"typeOne\" or \"typeTwo\"");
                None
            }
            _ => {
                self.err("spec.kind", "must be \"typeOne\" or \"typeTwo\"");
                None
            }
        };
        match (type_two, s.get("temperature")) {
            (Some(true), None) => self.err("spec.temperature", "required for typeTwo objectives"),
            (Some(false), Some(_)) => {
                self.err("spec.temperature", "only meaningful for typeTwo objectives")
            }
            (_, Some(t)) => match t.as_f64() {
                Some(t) if t.is_finite() && t > 0.0 => {}
                _ => self.err(
                    "spec.temperature",
                    format!("must be a positive number, got {t}"),
                ),
            },
            _ => {}
        }
        if let Some(e) = s.get("entropy") {
            if type_two == Some(false) {
                self.err("spec.entropy", "only meaningful for typeTwo objectives");
            }
            match e.as_str().map(str::parse::<EntropyFamily>) {
                Some(Ok(_)) => {}
                Some(Err(err)) => self.err("spec.entropy", err.to_string()),
                None => self.err("spec.entropy", format!("must be a string, got {e}")),
            }
        }
        match (regime, s.get("observable")) {
            (_, None) => self.err("spec.observable", "required"),
            (Some(Regime::Quantum), Some(_)) => {
                s.parse::<Observable>(self, "observable");
            }
            (Some(Regime::Classical), Some(_)) => {
                s.parse::<RandomFunction>(self, "observable");
            }
            (None, Some(_)) => {}
        }
        if self.errors.len() > before {
            return None;
        }
        match serde_json::from_value(value.clone()) {
            Ok(spec) => Some(spec),
            Err(e) => {
                self.err("spec", describe(e));
                None
            }
        }
    }

    fn initial_state(
        &mut self,
        s: &Section,
        key: &str,
        regime: Regime,
        dim: Option<usize>,
    ) -> InitialState {
        let path = join(&s.path, key);
        let default = match regime {
            Regime::Quantum => Preset::MaximallyMixed,
            Regime::Classical => Preset::Uniform,
        };
        let state = match s.get(key) {
            None => return InitialState::Preset(default),
            Some(Value::String(name)) => {
                return match (name.as_str(), regime) {
                    ("random", _) => InitialState::Preset(Preset::Random),
                    ("maximallyMixed", Regime::Quantum) => {
                        InitialState::Preset(Preset::MaximallyMixed)
                    }
                    ("uniform", Regime::Classical) => InitialState::Preset(Preset::Uniform),
                    _ => {
                        let presets = match regime {
                            Regime::Quantum => "\"maximallyMixed\" or \"random\"",
                            Regime::Classical => "\"uniform\" or \"random\"",
                        };
                        self.err(path, format!("unknown preset \"{name}\"; expected {presets} or an explicit state"));
                        InitialState::Preset(default)
                    }
                };
            }
            Some(_) => match regime {
                Regime::Quantum => s.parse::<DensityMatrix>(self, key).map(State::Quantum),
                Regime::Classical => s.parse::<Distribution>(self, key).map(State::Classical),
            },
        };
        match (state, dim) {
            (Some(st), Some(n)) if st.dim() != n => {
                self.err(
                    path,
                    format!("has dimension {} but the map has {n}", st.dim()),
                );
                InitialState::Preset(default)
            }
            (Some(st), _) => InitialState::Explicit(st),
            (None, _) => InitialState::Preset(default),
        }
    }

    fn map(
        &mut self,
        value: Option<&Value>,
        spec: Option<&ObjectiveSpec>,
        command: Command,
    ) -> Option<MapConfig> {
        let Some(value) = value else {
            return match spec {
                Some(sp) => Some(match sp.regime() {
                    Regime::Quantum => MapConfig::Kinematic {
                        dim: sp.dim(),
                        rank: sp.dim() * sp.dim(),
                        initial_state: InitialState::Preset(Preset::MaximallyMixed),
                    },
                    Regime::Classical => MapConfig::Stochastic {
                        cells: sp.dim(),
                        initial_distribution: InitialState::Preset(Preset::Uniform),
                    },
                }),
                None => {
                    if command == Command::RankCheck
                        && !self.errors.iter().any(|e| e.field_path.starts_with("spec"))
                    {
                        self.err(
                            "map",
                            "required by rank-check unless a spec fixes the dimension",
                        );
                    }
                    None
                }
            };
        };
        let kind = value.get("kind").and_then(Value::as_str);
        let allowed: &[&str] = match kind {
            Some("kinematic") => &["kind", "dim", "rank", "initialState"],
            Some("stochastic") => &["kind", "cells", "initialDistribution"],
            Some("lindblad") => &["kind", "model", "t0", "t1", "steps", "initialState"],
            _ => &["kind"],
        };
        let mut s = self.section(Some(value), "map", allowed);
        s.obj?;
        let spec_dim = spec.map(ObjectiveSpec::dim);
        let map = match kind {
            Some("kinematic") => {
                let dim = self.dimension(&mut s, "dim", spec_dim);
                let rank = s.count(self, "rank", dim.map_or(1, |n| n * n), 1);
                let initial_state = self.initial_state(&s, "initialState", Regime::Quantum, dim);
                dim.map(|dim| MapConfig::Kinematic {
                    dim,
                    rank,
                    initial_state,
                })
            }
            Some("stochastic") => {
                let cells = self.dimension(&mut s, "cells", spec_dim);
                let initial_distribution =
                    self.initial_state(&s, "initialDistribution", Regime::Classical, cells);
                cells.map(|cells| MapConfig::Stochastic {
                    cells,
                    initial_distribution,
                })
            }
            Some("lindblad") => self.lindblad(&mut s, spec_dim),
            Some(other) => {
                self.err(
                    "map.kind",
                    format!(
                        "unknown map kind \"{other}\"; expected kinematic, stochastic or lindblad"
                    ),
                );
                None
            }
            None => {
                self.err("map.kind", "required: kinematic, stochastic or lindblad");
                None
            }
        }?;
        if let Some(sp) = spec {
            if sp.regime() != map.regime() {
                self.err(
                    "map.kind",
                    format!(
                        "a {:?} map cannot drive a {:?} objective",
                        map.regime(),
                        sp.regime()
                    )
                    .to_lowercase(),
                );
                return None;
            }
        }
        Some(map)
    }

    fn dimension(&mut self, s: &mut Section, key: &str, spec_dim: Option<usize>) -> Option<usize> {
        match (s.get(key), spec_dim) {
            (None, Some(n)) => Some(n),
            (None, None) => {
                self.err(
                    join(&s.path, key),
                    "required when no spec fixes the dimension",
                );
                None
            }
            (Some(_), _) => {
                let n = s.count(self, key, 0, 1);
                match spec_dim {
                    _ if n == 0 => None,
                    Some(m) if m != n => {
                        self.err(
                            join(&s.path, key),
                            format!("is {n} but the spec has dimension {m}"),
                        );
                        None
                    }
                    _ => Some(n),
                }
            }
        }
    }

    fn lindblad(&mut self, s: &mut Section, spec_dim: Option<usize>) -> Option<MapConfig> {
        let m = self.section(
            s.get("model"),
            "map.model",
            &["drift", "controls", "dissipators"],
        );
        if m.obj.is_none() && s.get("model").is_none() {
            self.err("map.model", "required");
        }
        let drift: Option<Observable> = match m.get("drift") {
            None if m.obj.is_some() => {
                self.err("map.model.drift", "required");
                None
            }
            _ => m.parse(self, "drift"),
        };
        let mut parse_list = |key: &str| -> Vec<Value> {
            match m.get(key) {
                None => Vec::new(),
                Some(Value::Array(a)) => a.clone(),
                Some(x) => {
                    self.err(
                        format!("map.model.{key}"),
                        format!("must be an array, got {x}"),
                    );
                    Vec::new()
                }
            }
        };
        let control_values = parse_list("controls");
        let dissipator_values = parse_list("dissipators");
        let mut controls = Vec::new();
        for (i, c) in control_values.into_iter().enumerate() {
            match serde_json::from_value::<Observable>(c) {
                Ok(o) => controls.push(o),
                Err(e) => self.err(format!("map.model.controls[{i}]"), describe(e)),
            }
        }
        let mut dissipators = Vec::new();
        for (i, d) in dissipator_values.into_iter().enumerate() {
            let path = format!("map.model.dissipators[{i}]");
            let Some(o) = d.as_object() else {
                self.err(path, "must be an object with operator and rate");
                continue;
            };
            self.unknown_keys(o, &path, &["operator", "rate"]);
            let op = o
                .get("operator")
                .map(|x| serde_json::from_value::<MatrixJson>(x.clone()).map_err(describe))
                .unwrap_or_else(|| Err("required".into()))
                .and_then(|j| CMatrix::try_from(j).map_err(|e| e.to_string()));
            let rate = match o.get("rate").and_then(Value::as_f64) {
                Some(r) if r.is_finite() && r >= 0.0 => Some(r),
                _ => {
                    self.err(format!("{path}.rate"), "required: a non-negative number");
                    None
                }
            };
            match (op, rate) {
                (Ok(operator), Some(rate)) => dissipators.push(Dissipator { operator, rate }),
                (Err(e), _) => self.err(format!("{path}.operator"), e),
                _ => {}
            }
        }
        let model = drift.and_then(|d| match LindbladModel::new(d, controls, dissipators) {
            Ok(model) => Some(model),
            Err(e) => {
                self.err("map.model", e.to_string());
                None
            }
        });
        if let (Some(model), Some(n)) = (&model, spec_dim) {
            if model.dim() != n {
                self.err(
                    "map.model",
                    format!(
                        "has dimension {} but the spec has dimension {n}",
                        model.dim()
                    ),
                );
            }
        }
        let t0 = s.number(self, "t0", Some(0.0));
        let t1 = s.number(self, "t1", None);
        if let (Some(a), Some(b)) = (t0, t1) {
            if b <= a {
                self.err("map.t1", format!("must exceed t0 ({a}), got {b}"));
            }
        }
        let steps = s.count(self, "steps", 1, 1);
        let initial_state = self.initial_state(
            s,
            "initialState",
            Regime::Quantum,
            model.as_ref().map(LindbladModel::dim),
        );
        Some(MapConfig::Lindblad {
            model: model?,
            t0: t0?,
            t1: t1?,
            steps,
            initial_state,
        })
    }

    fn ascent(
        &mut self,
        value: Option<&Value>,
        path: &str,
        base: AscentConfig,
        seed: u64,
    ) -> AscentConfig {
        let mut s = self.section(
            value,
            path,
            &[
                "maxIterations",
                "stepSize",
                "gradientTolerance",
                "armijoBacktracking",
                "seed",
            ],
        );
        if s.get("seed").is_some() {
            self.err(join(path, "seed"), "set the top-level seed instead");
        }
        AscentConfig {
            max_iterations: s.count(self, "maxIterations", base.max_iterations, 1),
            step_size: s.positive(self, "stepSize", base.step_size),
            gradient_tolerance: s.positive(self, "gradientTolerance", base.gradient_tolerance),
            armijo_backtracking: s.flag(self, "armijoBacktracking", base.armijo_backtracking),
            seed,
        }
    }

    fn run(&mut self, value: Option<&Value>, step: f64, seed: u64) -> RunConfig {
        let mut s = self.section(value, "run", &["nStarts", "valueTol", "classify", "ascent"]);
        let base = AscentConfig {
            step_size: step,
            ..AscentConfig::default()
        };
        RunConfig {
            n_starts: s.count(self, "nStarts", 100, 1),
            value_tol: s.positive(
                self,
                "valueTol",
                landscape_lab::landscape::DEFAULT_VALUE_TOL,
            ),
            classify: s.flag(self, "classify", false),
            ascent: self.ascent(s.get("ascent"), "run.ascent", base, seed),
        }
    }

    fn fixture(&mut self, value: Option<&Value>, base: FixtureConfig, seed: u64) -> FixtureConfig {
        let mut s = self.section(
            value,
            "fixture",
            &[
                "nStarts",
                "valueTol",
                "rankPoints",
                "kinematicStepSize",
                "ascent",
            ],
        );
        FixtureConfig {
            n_starts: s.count(self, "nStarts", base.n_starts, 1),
            value_tol: s.positive(self, "valueTol", base.value_tol),
            rank_points: s.count(self, "rankPoints", base.rank_points, 0),
            kinematic_step_size: s.positive(self, "kinematicStepSize", base.kinematic_step_size),
            ascent: self.ascent(s.get("ascent"), "fixture.ascent", base.ascent, seed),
        }
    }

    fn rank_check(&mut self, value: Option<&Value>) -> RankCheckConfig {
        let mut s = self.section(value, "rankCheck", &["points", "fdStep"]);
        RankCheckConfig {
            points: s.count(self, "points", 20, 1),
            fd_step: s.positive(
                self,
                "fdStep",
                landscape_lab::tolerances::TOLERANCES.fd_step,
            ),
        }
    }

    fn level_set(&mut self, value: Option<&Value>, spec: Option<&ObjectiveSpec>) -> LevelSetConfig {
        let mut s = self.section(value, "levelSet", &["pairs", "steps", "endpoints"]);
        let pairs = s.count(self, "pairs", 100, 1);
        let steps = s.count(self, "steps", 11, 1);
        let endpoints = match (s.get("endpoints"), spec) {
            (None, _) | (Some(_), None) => None,
            (Some(Value::Array(a)), Some(sp)) if a.len() == 2 => {
                let mut parsed = Vec::new();
                for (i, x) in a.iter().enumerate() {
                    let path = format!("levelSet.endpoints[{i}]");
                    let state =
                        match sp.regime() {
                            Regime::Quantum => serde_json::from_value::<DensityMatrix>(x.clone())
                                .map(State::Quantum),
                            Regime::Classical => serde_json::from_value::<Distribution>(x.clone())
                                .map(State::Classical),
                        };
                    match state {
                        Ok(st) if st.dim() == sp.dim() => parsed.push(st),
                        Ok(st) => self.err(
                            path,
                            format!("has dimension {} but the spec has {}", st.dim(), sp.dim()),
                        ),
                        Err(e) => self.err(path, describe(e)),
                    }
                }
                parsed.try_into().ok()
            }
            (Some(_), _) => {
                self.err("levelSet.endpoints", "must be an array of two states");
                None
            }
        };
        LevelSetConfig {
            pairs,
            steps,
            endpoints,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn check(v: Value) -> Result<ExperimentConfig, Vec<FieldError>> {
        validate(v.to_string().as_bytes(), None, None)
    }

    fn sigma_z() -> Value {
        json!({"dim": 2, "re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]})
    }

    fn paths(errors: &[FieldError]) -> Vec<&str> {
        errors.iter().map(|e| e.field_path.as_str()).collect()
    }

    #[test]
    fn minimal_optimize_config_gets_every_default() {
        let cfg = check(json!({
            "command": "optimize",
            "seed": 3,
            "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()}
        }))
        .unwrap();
        assert_eq!(
            cfg.map,
            Some(MapConfig::Kinematic {
                dim: 2,
                rank: 4,
                initial_state: InitialState::Preset(Preset::MaximallyMixed)
            })
        );
        let run = cfg.run.unwrap();
        assert_eq!(run.n_starts, 100);
        assert_eq!(run.ascent.step_size, 16.0);
        assert_eq!(run.ascent.seed, 3);
        assert_eq!(run.ascent.max_iterations, 2000);
        assert_eq!(cfg.output.trajectory_stride, 1);
    }

    #[test]
    fn negative_temperature_is_one_error() {
        let errs = check(json!({
            "command": "oracle",
            "seed": 0,
            "spec": {"regime": "quantum", "kind": "typeTwo", "temperature": -1.0, "observable": sigma_z()}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["spec.temperature"]);
    }

    #[test]
    fn missing_temperature_is_named() {
        let errs = check(json!({
            "command": "optimize",
            "seed": 0,
            "spec": {"regime": "quantum", "kind": "typeTwo", "observable": sigma_z()}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["spec.temperature"]);
        assert!(errs[0].message.contains("required"));
    }

    #[test]
    fn unknown_command_is_one_error() {
        let errs = check(json!({"command": "anneal", "seed": 0})).unwrap_err();
        assert_eq!(paths(&errs), ["command"]);
    }

    #[test]
    fn every_error_is_reported_at_once() {
        let errs = check(json!({
            "command": "optimize",
            "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()},
            "run": {"nStarts": 0, "valueTol": -1, "ascent": {"stepSize": "big", "seed": 4}},
            "output": {"trajectoryStride": 0},
            "probe": {}
        }))
        .unwrap_err();
        let mut p = paths(&errs);
        p.sort();
        assert_eq!(
            p,
            [
                "output.trajectoryStride",
                "probe",
                "run.ascent.seed",
                "run.ascent.stepSize",
                "run.nStarts",
                "run.valueTol",
                "seed"
            ]
        );
    }

    #[test]
    fn command_line_seed_and_command_apply() {
        let text = json!({"spec": {"regime": "classical", "kind": "typeOne", "observable": {"values": [1, 2, 3, 4]}}})
            .to_string();
        let cfg = validate(text.as_bytes(), Some(Command::Oracle), Some(9)).unwrap();
        assert_eq!((cfg.command, cfg.seed), (Command::Oracle, 9));
        let clash = json!({"command": "oracle", "seed": 1}).to_string();
        let errs = validate(clash.as_bytes(), Some(Command::Optimize), None).unwrap_err();
        assert_eq!(paths(&errs), ["command"]);
    }

    #[test]
    fn map_must_fit_the_spec() {
        let errs = check(json!({
            "command": "optimize",
            "seed": 0,
            "spec": {"regime": "classical", "kind": "typeOne", "observable": {"values": [1, 2, 3]}},
            "map": {"kind": "kinematic", "dim": 3}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["map.kind"]);
        let errs = check(json!({
            "command": "optimize",
            "seed": 0,
            "spec": {"regime": "classical", "kind": "typeOne", "observable": {"values": [1, 2, 3]}},
            "map": {"kind": "stochastic", "cells": 4, "initialDistribution": "maximallyMixed"}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["map.cells", "map.initialDistribution"]);
    }

    #[test]
    fn lindblad_maps_parse_and_check_time_windows() {
        let cfg = check(json!({
            "command": "rank-check",
            "seed": 0,
            "map": {
                "kind": "lindblad",
                "model": {"drift": sigma_z(), "controls": [sigma_z()], "dissipators": [{"operator": sigma_z(), "rate": 1.0}]},
                "t1": 1.0,
                "steps": 4,
                "initialState": {"dim": 2, "re": [[0.5, 0.5], [0.5, 0.5]], "im": [[0, 0], [0, 0]]}
            }
        }))
        .unwrap();
        assert!(matches!(
            cfg.map,
            Some(MapConfig::Lindblad { steps: 4, .. })
        ));
        let errs = check(json!({
            "command": "rank-check",
            "seed": 0,
            "map": {"kind": "lindblad", "model": {"drift": sigma_z(), "dissipators": [{"operator": sigma_z(), "rate": -1}]}, "t0": 2, "t1": 1}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["map.model.dissipators[0].rate", "map.t1"]);
    }

    #[test]
    fn level_set_needs_type_one() {
        let errs = check(json!({
            "command": "level-set",
            "seed": 0,
            "spec": {"regime": "quantum", "kind": "typeTwo", "temperature": 1, "observable": sigma_z()}
        }))
        .unwrap_err();
        assert_eq!(paths(&errs), ["spec.kind"]);
    }

    #[test]
    fn fixtures_take_their_own_defaults() {
        let cfg = check(json!({"command": "real-trap", "seed": 2})).unwrap();
        let f = cfg.fixture.unwrap();
        assert_eq!(
            f.ascent.step_size,
            FixtureConfig::dynamic().ascent.step_size
        );
        assert_eq!(f.ascent.seed, 2);
        let cfg =
            check(json!({"command": "false-trap", "seed": 2, "fixture": {"nStarts": 5}})).unwrap();
        assert_eq!(cfg.fixture.unwrap().n_starts, 5);
    }

    #[test]
    fn malformed_json_is_a_root_error() {
        let errs = validate(b"{", None, None).unwrap_err();
        assert_eq!(paths(&errs), [""]);
    }
}
