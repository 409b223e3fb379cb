//! Scenario and run configuration files (TOML).
//!
//! A config document holds exactly one scenario source, either an explicit
//! `[scenario]` table or a `[generate]` table, plus an optional `[run]` table:
//!
//! ```toml
//! [run]
//! seed = 7
//! emit = ["metrics", "traj"]
//!
//! [generate]
//! agents = 10
//! tasks = 10
//! loiter = 5
//! comm_range = 0.3
//! ```

use std::path::PathBuf;

use gcaa_core::model::{
    AgentState, AgentStatus, Scenario, Task, TaskKind, DEFAULT_DRAG, DEFAULT_FIXED_FREEZE_RADIUS,
    DEFAULT_FREEZE_RADIUS_FACTOR, DEFAULT_LOITER_SAMPLES,
};
use gcaa_core::{generate_random_scenario, CommRange, CostBackend, GeneratorParams, Vec2};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_NUMERIC_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeDto {
    Value(f64),
    Word(String),
}

impl RangeDto {
    fn resolve(&self) -> Result<CommRange, CliError> {
        match self {
            RangeDto::Value(r) => Ok(CommRange::Limited(*r)),
            RangeDto::Word(w) => parse_range(w),
        }
    }

    fn from_range(r: CommRange) -> Self {
        match r {
            CommRange::Limited(v) => RangeDto::Value(v),
            CommRange::Unlimited => RangeDto::Word("unlimited".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDto {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passive_task: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoiterDto {
    pub radius: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDto {
    pub position: [f64; 2],
    #[serde(default)]
    pub terminal_velocity: [f64; 2],
    pub reward: f64,
    pub completion_time: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loiter: Option<LoiterDto>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDto {
    pub horizon: f64,
    pub steps: usize,
    pub comm_range: RangeDto,
    #[serde(default = "default_drag")]
    pub drag: f64,
    #[serde(default = "default_factor")]
    pub freeze_radius_factor: f64,
    #[serde(default = "default_fixed_radius")]
    pub fixed_freeze_radius: f64,
    #[serde(default = "default_samples")]
    pub loiter_samples: usize,
    #[serde(default)]
    pub success_prob: Vec<Vec<f64>>,
    #[serde(default)]
    pub agents: Vec<AgentDto>,
    #[serde(default)]
    pub tasks: Vec<TaskDto>,
}

fn default_drag() -> f64 {
    DEFAULT_DRAG
}
fn default_factor() -> f64 {
    DEFAULT_FREEZE_RADIUS_FACTOR
}
fn default_fixed_radius() -> f64 {
    DEFAULT_FIXED_FREEZE_RADIUS
}
fn default_samples() -> usize {
    DEFAULT_LOITER_SAMPLES
}

impl ScenarioDto {
    pub fn into_scenario(self) -> Result<Scenario, CliError> {
        let p = self.tasks.len();
        let agents = self
            .agents
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let mut s = AgentState::new(i, Vec2::from(a.position), Vec2::from(a.velocity));
                if let Some(j) = a.passive_task {
                    if j >= p {
                        return Err(CliError::validation(
                            format!("agents[{i}].passive_task"),
                            format!("task {j} out of range"),
                        ));
                    }
                    s.status = AgentStatus::Passive(j);
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tasks = self
            .tasks
            .into_iter()
            .enumerate()
            .map(|(j, t)| Task {
                id: j,
                position: Vec2::from(t.position),
                terminal_velocity: Vec2::from(t.terminal_velocity),
                nominal_reward: t.reward,
                completion_time: t.completion_time,
                kind: match t.loiter {
                    Some(l) => TaskKind::Loiter {
                        radius: l.radius,
                        loiter_time: l.time,
                    },
                    None => TaskKind::Fixed,
                },
                lambda: t.lambda,
            })
            .collect();
        let scenario = Scenario {
            agents,
            tasks,
            success_prob: self.success_prob,
            comm_range: self.comm_range.resolve()?,
            drag: self.drag,
            horizon: self.horizon,
            steps: self.steps,
            freeze_radius_factor: self.freeze_radius_factor,
            fixed_freeze_radius: self.fixed_freeze_radius,
            loiter_samples: self.loiter_samples,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            horizon: s.horizon,
            steps: s.steps,
            comm_range: RangeDto::from_range(s.comm_range),
            drag: s.drag,
            freeze_radius_factor: s.freeze_radius_factor,
            fixed_freeze_radius: s.fixed_freeze_radius,
            loiter_samples: s.loiter_samples,
            success_prob: s.success_prob.clone(),
            agents: s
                .agents
                .iter()
                .map(|a| AgentDto {
                    position: [a.position.x, a.position.y],
                    velocity: [a.velocity.x, a.velocity.y],
                    passive_task: match a.status {
                        AgentStatus::Passive(j) => Some(j),
                        AgentStatus::Active => None,
                    },
                })
                .collect(),
            tasks: s
                .tasks
                .iter()
                .map(|t| TaskDto {
                    position: [t.position.x, t.position.y],
                    terminal_velocity: [t.terminal_velocity.x, t.terminal_velocity.y],
                    reward: t.nominal_reward,
                    completion_time: t.completion_time,
                    lambda: t.lambda,
                    loiter: match t.kind {
                        TaskKind::Loiter { radius, loiter_time } => Some(LoiterDto {
                            radius,
                            time: loiter_time,
                        }),
                        TaskKind::Fixed => None,
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateDto {
    pub agents: usize,
    pub tasks: usize,
    #[serde(default)]
    pub loiter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_range: Option<RangeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl GenerateDto {
    fn into_params(self) -> Result<GeneratorParams, CliError> {
        let d = GeneratorParams::default();
        Ok(GeneratorParams {
            agents: self.agents,
            tasks: self.tasks,
            loiter: self.loiter,
            comm_range: match self.comm_range {
                Some(r) => r.resolve()?,
                None => d.comm_range,
            },
            horizon: self.horizon.unwrap_or(d.horizon),
            steps: self.steps.unwrap_or(d.steps),
            drag: self.drag.unwrap_or(d.drag),
            lambda: self.lambda.unwrap_or(d.lambda),
            ..d
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDto {
    pub seed: Option<u64>,
    pub stride: Option<usize>,
    pub backend: Option<String>,
    pub emit: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateDto>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Emit {
    pub metrics: bool,
    pub trajectories: bool,
    pub bids: bool,
    pub scenario: bool,
}

impl Emit {
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self, CliError> {
        let mut e = Emit::default();
        for item in items {
            match item.as_ref().trim() {
                "metrics" => e.metrics = true,
                "traj" | "trajectories" => e.trajectories = true,
                "bids" => e.bids = true,
                "scenario" => e.scenario = true,
                "" | "none" => {}
                other => {
                    return Err(CliError::validation("emit", format!("unknown output '{other}'")));
                }
            }
        }
        Ok(e)
    }

    pub fn names(&self) -> Vec<&'static str> {
        [
            (self.metrics, "metrics"),
            (self.trajectories, "traj"),
            (self.bids, "bids"),
            (self.scenario, "scenario"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Explicit(Box<Scenario>),
    Generate(GeneratorParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit: Emit,
    pub stride: usize,
    pub backend: CostBackend,
}

/// Command-line values that take precedence over the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub range: Option<CommRange>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub emit: Option<Emit>,
    pub stride: Option<usize>,
    pub backend: Option<CostBackend>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let doc: ConfigDocument = toml::from_str(text).map_err(|e| CliError::from_toml(text, &e))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: ConfigDocument) -> Result<Self, CliError> {
        let source = match (doc.scenario, doc.generate) {
            (Some(s), None) => Source::Explicit(Box::new(s.into_scenario()?)),
            (None, Some(g)) => Source::Generate(g.into_params()?),
            (Some(_), Some(_)) => {
                return Err(CliError::validation("scenario", "give either [scenario] or [generate], not both"))
            }
            (None, None) => return Err(CliError::validation("scenario", "missing [scenario] or [generate]")),
        };
        Self::with_source(source, doc.run.unwrap_or_default())
    }

    pub fn with_source(source: Source, run: RunDto) -> Result<Self, CliError> {
        let stride = run.stride.unwrap_or(1);
        if stride == 0 {
            return Err(CliError::validation("stride", "must be >= 1"));
        }
        Ok(Self {
            source,
            seed: run.seed.unwrap_or(0),
            out_dir: run.out.unwrap_or_else(|| PathBuf::from("out")),
            emit: match run.emit {
                Some(items) => Emit::parse(&items)?,
                None => Emit {
                    metrics: true,
                    ..Emit::default()
                },
            },
            stride,
            backend: match run.backend {
                Some(b) => parse_backend(&b)?,
                None => CostBackend::ClosedForm,
            },
        })
    }

    pub fn apply(&mut self, o: Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = o.out_dir {
            self.out_dir = out;
        }
        if let Some(emit) = o.emit {
            self.emit = emit;
        }
        if let Some(stride) = o.stride {
            if stride == 0 {
                return Err(CliError::validation("stride", "must be >= 1"));
            }
            self.stride = stride;
        }
        if let Some(backend) = o.backend {
            self.backend = backend;
        }
        match &mut self.source {
            Source::Generate(p) => {
                if let Some(r) = o.range {
                    p.comm_range = r;
                }
                if let Some(h) = o.horizon {
                    p.horizon = h;
                }
                if let Some(k) = o.steps {
                    p.steps = k;
                }
            }
            Source::Explicit(s) => {
                if let Some(r) = o.range {
                    s.comm_range = r;
                }
                if let Some(h) = o.horizon {
                    s.horizon = h;
                }
                if let Some(k) = o.steps {
                    s.steps = k;
                }
                s.validate()?;
            }
        }
        Ok(())
    }

    /// The scenario to simulate; generated ones are drawn from `seed`.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        match &self.source {
            Source::Explicit(s) => Ok((**s).clone()),
            Source::Generate(p) => Ok(generate_random_scenario(p, self.seed)?),
        }
    }
}

/// Parses a config document and resolves its scenario.
pub fn parse_config(text: &str) -> Result<(RunConfig, Scenario), CliError> {
    let cfg = RunConfig::from_toml(text)?;
    let scenario = cfg.scenario()?;
    Ok((cfg, scenario))
}

/// Serializes a scenario as a `[scenario]` document accepted by [`parse_config`].
pub fn scenario_to_toml(s: &Scenario) -> Result<String, CliError> {
    let doc = ConfigDocument {
        run: None,
        scenario: Some(ScenarioDto::from_scenario(s)),
        generate: None,
    };
    toml::to_string(&doc).map_err(|e| CliError::Simulation(format!("cannot serialize scenario: {e}")))
}

pub fn parse_range(text: &str) -> Result<CommRange, CliError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("unlimited") || t.eq_ignore_ascii_case("inf") {
        return Ok(CommRange::Unlimited);
    }
    let r: f64 = t
        .parse()
        .map_err(|_| CliError::parse(format!("range: expected a number or 'unlimited', got '{t}'")))?;
    if !(r.is_finite() && r > 0.0) {
        return Err(CliError::validation("comm_range", "must be > 0 or unlimited"));
    }
    Ok(CommRange::Limited(r))
}

/// `closed-form`, `numeric` or `numeric:<steps>`.
pub fn parse_backend(text: &str) -> Result<CostBackend, CliError> {
    match text.trim() {
        "closed-form" | "closed" => Ok(CostBackend::ClosedForm),
        "numeric" => Ok(CostBackend::Numeric {
            steps: DEFAULT_NUMERIC_STEPS,
        }),
        other => match other.strip_prefix("numeric:") {
            Some(k) => {
                let steps: usize = k
                    .parse()
                    .map_err(|_| CliError::parse(format!("backend: bad step count '{k}'")))?;
                if steps < 3 {
                    return Err(CliError::validation("backend", "numeric backend needs >= 3 steps"));
                }
                Ok(CostBackend::Numeric { steps })
            }
            None => Err(CliError::parse(format!(
                "backend: expected closed-form, numeric or numeric:<steps>, got '{other}'"
            ))),
        },
    }
}

/// `n=<int>,p=<int>,loiter=<int>`; `loiter` defaults to 0.
pub fn parse_generate(text: &str) -> Result<GeneratorParams, CliError> {
    let mut params = GeneratorParams {
        loiter: 0,
        ..GeneratorParams::default()
    };
    let (mut n, mut p) = (None, None);
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::parse(format!("generate: expected key=value, got '{item}'")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| CliError::parse(format!("generate: '{key}' needs a non-negative integer")))?;
        match key.trim() {
            "n" | "agents" => n = Some(value),
            "p" | "tasks" => p = Some(value),
            "loiter" => params.loiter = value,
            other => return Err(CliError::parse(format!("generate: unknown key '{other}'"))),
        }
    }
    params.agents = n.ok_or_else(|| CliError::parse("generate: missing n"))?;
    params.tasks = p.ok_or_else(|| CliError::parse("generate: missing p"))?;
    if params.loiter > params.tasks {
        return Err(CliError::validation("loiter", format!("{} exceeds task count {}", params.loiter, params.tasks)));
    }
    Ok(params)
}
