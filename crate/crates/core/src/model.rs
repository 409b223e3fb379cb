//! Domain types and the utility algebra of coalition task allocation.
//!
//! Every function here is pure. Per-agent costs-to-go are injected through a
//! [`CostTable`] so the utility math does not depend on the control layer.

use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("no cost entry for agent {agent} on task {task}")]
    MissingCost { agent: usize, task: usize },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ModelError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentStatus {
    Active,
    /// Assignment frozen to the given task for the rest of the run.
    Passive(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub status: AgentStatus,
}

impl AgentState {
    pub fn new(id: usize, position: Vec2, velocity: Vec2) -> Self {
        Self {
            id,
            position,
            velocity,
            status: AgentStatus::Active,
        }
    }

    pub fn is_passive(&self) -> bool {
        matches!(self.status, AgentStatus::Passive(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskKind {
    /// Reach the target state at the completion time.
    Fixed,
    /// Reach the circle of `radius` around the target at
    /// `completion_time - loiter_time`, then circle it until completion.
    Loiter { radius: f64, loiter_time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: usize,
    pub position: Vec2,
    pub terminal_velocity: Vec2,
    pub nominal_reward: f64,
    pub completion_time: f64,
    pub kind: TaskKind,
    /// Converts control effort into reward units.
    pub lambda: f64,
}

impl Task {
    pub fn fixed(id: usize, position: Vec2, nominal_reward: f64, completion_time: f64) -> Self {
        Self {
            id,
            position,
            terminal_velocity: Vec2::zeros(),
            nominal_reward,
            completion_time,
            kind: TaskKind::Fixed,
            lambda: 1.0,
        }
    }

    pub fn is_loiter(&self) -> bool {
        matches!(self.kind, TaskKind::Loiter { .. })
    }

    /// Time at which the terminal constraint must hold: the completion time
    /// for fixed tasks, the loiter start for loiter tasks.
    pub fn terminal_time(&self) -> f64 {
        match self.kind {
            TaskKind::Fixed => self.completion_time,
            TaskKind::Loiter { loiter_time, .. } => self.completion_time - loiter_time,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let f = |name: &str| format!("tasks[{}].{}", self.id, name);
        if !finite2(&self.position) {
            return Err(ModelError::invalid(f("position"), "must be finite"));
        }
        if !finite2(&self.terminal_velocity) {
            return Err(ModelError::invalid(f("terminal_velocity"), "must be finite"));
        }
        if !(self.nominal_reward.is_finite() && self.nominal_reward >= 0.0) {
            return Err(ModelError::invalid(f("nominal_reward"), "must be >= 0"));
        }
        if !(self.completion_time.is_finite() && self.completion_time > 0.0) {
            return Err(ModelError::invalid(f("completion_time"), "must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ModelError::invalid(f("lambda"), "must be > 0"));
        }
        if let TaskKind::Loiter {
            radius,
            loiter_time,
        } = self.kind
        {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(ModelError::invalid(f("radius"), "must be > 0"));
            }
            if !(loiter_time >= 0.0 && loiter_time <= self.completion_time) {
                return Err(ModelError::invalid(
                    f("loiter_time"),
                    "must lie in [0, completion_time]",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Assignment {
    #[default]
    Null,
    Task(usize),
}

impl Assignment {
    pub fn task(self) -> Option<usize> {
        match self {
            Assignment::Null => None,
            Assignment::Task(j) => Some(j),
        }
    }

    pub fn is_null(self) -> bool {
        self == Assignment::Null
    }
}

/// Joint assignment of every agent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AllocationProfile {
    pub assignments: Vec<Assignment>,
}

impl AllocationProfile {
    pub fn all_null(n: usize) -> Self {
        Self {
            assignments: vec![Assignment::Null; n],
        }
    }

    pub fn new(assignments: Vec<Assignment>) -> Self {
        Self { assignments }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn get(&self, agent: usize) -> Assignment {
        self.assignments[agent]
    }

    /// Same profile with `agent` switched to the null assignment.
    pub fn without(&self, agent: usize) -> Self {
        let mut out = self.clone();
        out.assignments[agent] = Assignment::Null;
        out
    }

    /// Agents assigned to `task`, in increasing index order.
    pub fn members(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Assignment::Task(task))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommRange {
    Limited(f64),
    Unlimited,
}

impl std::fmt::Display for CommRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommRange::Limited(r) => write!(f, "{r}"),
            CommRange::Unlimited => f.write_str("unlimited"),
        }
    }
}

/// Costs-to-go `rho[i][j]` for agent `i` on task `j`. Entries may be absent
/// (never evaluated) or `+inf` (task unreachable in time).
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    agents: usize,
    tasks: usize,
    values: Vec<Option<f64>>,
}

impl CostTable {
    pub fn new(agents: usize, tasks: usize) -> Self {
        Self {
            agents,
            tasks,
            values: vec![None; agents * tasks],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let agents = rows.len();
        let tasks = rows.first().map_or(0, Vec::len);
        let mut table = Self::new(agents, tasks);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), tasks, "ragged cost rows");
            for (j, &c) in row.iter().enumerate() {
                table.set(i, j, c);
            }
        }
        table
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn set(&mut self, agent: usize, task: usize, cost: f64) {
        self.values[agent * self.tasks + task] = Some(cost);
    }

    pub fn get(&self, agent: usize, task: usize) -> Option<f64> {
        if agent >= self.agents || task >= self.tasks {
            return None;
        }
        self.values[agent * self.tasks + task]
    }

    pub fn require(&self, agent: usize, task: usize) -> Result<f64, ModelError> {
        self.get(agent, task)
            .ok_or(ModelError::MissingCost { agent, task })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub agents: Vec<AgentState>,
    pub tasks: Vec<Task>,
    /// `success_prob[i][j]`: probability that agent `i` completes task `j`.
    pub success_prob: Vec<Vec<f64>>,
    pub comm_range: CommRange,
    pub drag: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Loiter tasks freeze an agent's assignment inside this multiple of the radius.
    pub freeze_radius_factor: f64,
    /// Freeze distance for fixed tasks.
    pub fixed_freeze_radius: f64,
    pub loiter_samples: usize,
}

pub const DEFAULT_DRAG: f64 = 0.1;
pub const DEFAULT_FREEZE_RADIUS_FACTOR: f64 = 2.0;
pub const DEFAULT_FIXED_FREEZE_RADIUS: f64 = 0.05;
pub const DEFAULT_LOITER_SAMPLES: usize = 10;

impl Scenario {
    /// Scenario with default dynamics constants and an unlimited range.
    pub fn new(
        agents: Vec<AgentState>,
        tasks: Vec<Task>,
        success_prob: Vec<Vec<f64>>,
        horizon: f64,
        steps: usize,
    ) -> Self {
        Self {
            agents,
            tasks,
            success_prob,
            comm_range: CommRange::Unlimited,
            drag: DEFAULT_DRAG,
            horizon,
            steps,
            freeze_radius_factor: DEFAULT_FREEZE_RADIUS_FACTOR,
            fixed_freeze_radius: DEFAULT_FIXED_FREEZE_RADIUS,
            loiter_samples: DEFAULT_LOITER_SAMPLES,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn time_step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn success(&self, agent: usize, task: usize) -> f64 {
        self.success_prob[agent][task]
    }

    /// Freeze distance for an agent assigned to `task`.
    pub fn freeze_radius(&self, task: usize) -> f64 {
        match self.tasks[task].kind {
            TaskKind::Fixed => self.fixed_freeze_radius,
            TaskKind::Loiter { radius, .. } => self.freeze_radius_factor * radius,
        }
    }

    /// Checks every invariant; errors name the offending field.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.agents.len();
        let p = self.tasks.len();
        for (i, a) in self.agents.iter().enumerate() {
            if a.id != i {
                return Err(ModelError::invalid(
                    format!("agents[{i}].id"),
                    format!("expected {i}, found {}", a.id),
                ));
            }
            if !finite2(&a.position) {
                return Err(ModelError::invalid(format!("agents[{i}].position"), "must be finite"));
            }
            if !finite2(&a.velocity) {
                return Err(ModelError::invalid(format!("agents[{i}].velocity"), "must be finite"));
            }
            if let AgentStatus::Passive(j) = a.status {
                if j >= p {
                    return Err(ModelError::invalid(
                        format!("agents[{i}].status"),
                        format!("passive task {j} out of range"),
                    ));
                }
            }
        }
        for (j, t) in self.tasks.iter().enumerate() {
            if t.id != j {
                return Err(ModelError::invalid(
                    format!("tasks[{j}].id"),
                    format!("expected {j}, found {}", t.id),
                ));
            }
            t.validate()?;
        }
        if self.success_prob.len() != n {
            return Err(ModelError::invalid(
                "success_prob",
                format!("expected {n} rows, found {}", self.success_prob.len()),
            ));
        }
        for (i, row) in self.success_prob.iter().enumerate() {
            if row.len() != p {
                return Err(ModelError::invalid(
                    "success_prob",
                    format!("row {i} has {} entries, expected {p}", row.len()),
                ));
            }
            if let Some((j, v)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(ModelError::invalid(
                    "success_prob",
                    format!("entry [{i}][{j}] = {v} outside [0, 1]"),
                ));
            }
        }
        if let CommRange::Limited(r) = self.comm_range {
            if !(r.is_finite() && r > 0.0) {
                return Err(ModelError::invalid("comm_range", "must be > 0 or unlimited"));
            }
        }
        if !(self.drag.is_finite() && self.drag >= 0.0) {
            return Err(ModelError::invalid("drag", "must be >= 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ModelError::invalid("horizon", "must be > 0"));
        }
        if self.steps == 0 {
            return Err(ModelError::invalid("steps", "must be >= 1"));
        }
        if !(self.freeze_radius_factor.is_finite() && self.freeze_radius_factor > 0.0) {
            return Err(ModelError::invalid("freeze_radius_factor", "must be > 0"));
        }
        if !(self.fixed_freeze_radius.is_finite() && self.fixed_freeze_radius > 0.0) {
            return Err(ModelError::invalid("fixed_freeze_radius", "must be > 0"));
        }
        if self.loiter_samples == 0 {
            return Err(ModelError::invalid("loiter_samples", "must be >= 1"));
        }
        Ok(())
    }

    fn check_task(&self, task: usize) -> Result<(), ModelError> {
        if task >= self.tasks.len() {
            return Err(ModelError::IndexOutOfRange {
                what: "task",
                index: task,
                len: self.tasks.len(),
            });
        }
        Ok(())
    }

    fn check_profile(&self, profile: &AllocationProfile) -> Result<(), ModelError> {
        if profile.len() != self.agents.len() {
            return Err(ModelError::invalid(
                "profile",
                format!("length {} != agent count {}", profile.len(), self.agents.len()),
            ));
        }
        for a in &profile.assignments {
            if let Assignment::Task(j) = *a {
                self.check_task(j)?;
            }
        }
        Ok(())
    }
}

fn finite2(v: &Vec2) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Agents assigned to `task` under `profile`.
pub fn coalition(
    scenario: &Scenario,
    profile: &AllocationProfile,
    task: usize,
) -> Result<Vec<usize>, ModelError> {
    scenario.check_task(task)?;
    scenario.check_profile(profile)?;
    Ok(profile.members(task).collect())
}

/// Probability that nobody in the coalition completes `task`.
fn failure_probability(scenario: &Scenario, profile: &AllocationProfile, task: usize) -> f64 {
    profile
        .members(task)
        .map(|i| 1.0 - scenario.success(i, task))
        .product()
}

/// Nominal reward times the probability that at least one coalition member succeeds.
pub fn expected_reward(
    scenario: &Scenario,
    profile: &AllocationProfile,
    task: usize,
) -> Result<f64, ModelError> {
    scenario.check_task(task)?;
    scenario.check_profile(profile)?;
    Ok(scenario.tasks[task].nominal_reward * (1.0 - failure_probability(scenario, profile, task)))
}

/// Reward added by an agent with success probability `success` joining a
/// coalition whose joint failure probability is `others_failure`.
pub fn marginal_reward(nominal_reward: f64, success: f64, others_failure: f64) -> f64 {
    nominal_reward * success * others_failure
}

pub fn task_completion_cost(
    scenario: &Scenario,
    profile: &AllocationProfile,
    task: usize,
    costs: &CostTable,
) -> Result<f64, ModelError> {
    scenario.check_task(task)?;
    scenario.check_profile(profile)?;
    profile
        .members(task)
        .map(|i| costs.require(i, task))
        .sum()
}

pub fn task_utility(
    scenario: &Scenario,
    profile: &AllocationProfile,
    task: usize,
    costs: &CostTable,
) -> Result<f64, ModelError> {
    let reward = expected_reward(scenario, profile, task)?;
    let cost = task_completion_cost(scenario, profile, task, costs)?;
    Ok(reward - scenario.tasks[task].lambda * cost)
}

pub fn global_utility(
    scenario: &Scenario,
    profile: &AllocationProfile,
    costs: &CostTable,
) -> Result<f64, ModelError> {
    (0..scenario.task_count())
        .map(|j| task_utility(scenario, profile, j, costs))
        .sum()
}

/// Contribution of `agent` to the global utility, evaluated on its own task only.
///
/// Other coalition members' costs cancel in the difference, so only the
/// agent's own cost entry is required.
pub fn marginal_utility(
    scenario: &Scenario,
    profile: &AllocationProfile,
    agent: usize,
    costs: &CostTable,
) -> Result<f64, ModelError> {
    scenario.check_profile(profile)?;
    if agent >= profile.len() {
        return Err(ModelError::IndexOutOfRange {
            what: "agent",
            index: agent,
            len: profile.len(),
        });
    }
    let Assignment::Task(j) = profile.get(agent) else {
        return Ok(0.0);
    };
    let with = expected_reward(scenario, profile, j)?;
    let without = expected_reward(scenario, &profile.without(agent), j)?;
    Ok(with - without - scenario.tasks[j].lambda * costs.require(agent, j)?)
}
