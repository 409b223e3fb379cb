//! Dynamic task allocation: agents move under minimum-effort control while
//! the team re-runs the auction from their current states at every step.
//!
//! One [`Simulator::step`] rebuilds the communication graph, re-auctions the
//! active agents, freezes agents that came close enough to their task,
//! advances every agent by one RK4 step and appends a metrics record.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::auction::{build_comm_graph, run_gcaa, AuctionError, AuctionOptions, AuctionResult, BidState, CommunicationGraph};
use crate::control::{
    agent_task_cost, cost_to_go, integrate_feedback_step, integrate_held, loiter_control, loiter_effort,
    plan_loiter_entry, tracking_law, BoundaryConditions, ControlError, CostBackend, CostConfig, LoiterPlan,
};
use crate::model::{
    expected_reward, AgentState, AgentStatus, AllocationProfile, Assignment, CommRange, CostTable, ModelError,
    Scenario, Task, TaskKind,
};
use crate::seeding::{substream, Stream};
use crate::Vec2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error("step {step} is past the horizon ({steps} steps)")]
    PastHorizon { step: usize, steps: usize },
}

/// Parameters of the random scenario generator. Defaults reproduce the
/// 10-agent, 10-task setup with 5 loiter tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub agents: usize,
    pub tasks: usize,
    pub loiter: usize,
    pub comm_range: CommRange,
    pub horizon: f64,
    pub steps: usize,
    pub drag: f64,
    pub lambda: f64,
    pub freeze_radius_factor: f64,
    pub fixed_freeze_radius: f64,
    pub loiter_samples: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            agents: 10,
            tasks: 10,
            loiter: 5,
            comm_range: CommRange::Limited(0.3),
            horizon: 10.0,
            steps: 1000,
            drag: crate::model::DEFAULT_DRAG,
            lambda: 1.0,
            freeze_radius_factor: crate::model::DEFAULT_FREEZE_RADIUS_FACTOR,
            fixed_freeze_radius: crate::model::DEFAULT_FIXED_FREEZE_RADIUS,
            loiter_samples: crate::model::DEFAULT_LOITER_SAMPLES,
        }
    }
}

impl GeneratorParams {
    fn validate(&self) -> Result<(), SimError> {
        if self.loiter > self.tasks {
            return Err(SimError::Config(format!(
                "loiter count {} exceeds task count {}",
                self.loiter, self.tasks
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SimError::Config("horizon must be > 0".into()));
        }
        if self.steps == 0 {
            return Err(SimError::Config("steps must be >= 1".into()));
        }
        if let CommRange::Limited(r) = self.comm_range {
            if !(r.is_finite() && r > 0.0) {
                return Err(SimError::Config("comm_range must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Whether task `j` of `tasks` is a loiter task when `loiter` of them are.
/// Loiter tasks are spread evenly through the index range.
pub fn is_loiter_index(j: usize, loiter: usize, tasks: usize) -> bool {
    tasks > 0 && (j + 1) * loiter / tasks > j * loiter / tasks
}

/// Samples a scenario: positions uniform in the unit square, agents at rest,
/// completion times in `[0.9, 1] * horizon`, fixed-task terminal velocity
/// components in `[-0.1, 0.1]`, loiter radii in `[0.032, 0.048]`, loiter
/// times in `[0.15, 0.25] * horizon`, rewards in `[0, 0.2]` (fixed) or
/// `[0, 1]` (loiter), success probabilities in `[0, 1]`.
pub fn generate_random_scenario(params: &GeneratorParams, seed: u64) -> Result<Scenario, SimError> {
    params.validate()?;
    let agents = (0..params.agents)
        .map(|i| {
            let mut rng = substream(seed, Stream::Agent, i as u64);
            let position = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
            AgentState::new(i, position, Vec2::zeros())
        })
        .collect();
    let tasks = (0..params.tasks)
        .map(|j| {
            let mut rng = substream(seed, Stream::Task, j as u64);
            let position = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
            let completion_time = params.horizon * rng.random_range(0.9..=1.0);
            let terminal_velocity = Vec2::new(rng.random_range(-0.1..=0.1), rng.random_range(-0.1..=0.1));
            let reward_draw: f64 = rng.random();
            let radius = rng.random_range(0.032..=0.048);
            let loiter_time = params.horizon * rng.random_range(0.15..=0.25);
            let loiter = is_loiter_index(j, params.loiter, params.tasks);
            Task {
                id: j,
                position,
                terminal_velocity: if loiter { Vec2::zeros() } else { terminal_velocity },
                nominal_reward: if loiter { reward_draw } else { 0.2 * reward_draw },
                completion_time,
                kind: if loiter {
                    TaskKind::Loiter { radius, loiter_time }
                } else {
                    TaskKind::Fixed
                },
                lambda: params.lambda,
            }
        })
        .collect();
    let success_prob = (0..params.agents)
        .map(|i| {
            (0..params.tasks)
                .map(|j| substream(seed, Stream::SuccessProb, ((i as u64) << 28) | j as u64).random::<f64>())
                .collect()
        })
        .collect();
    let scenario = Scenario {
        agents,
        tasks,
        success_prob,
        comm_range: params.comm_range,
        drag: params.drag,
        horizon: params.horizon,
        steps: params.steps,
        freeze_radius_factor: params.freeze_radius_factor,
        fixed_freeze_radius: params.fixed_freeze_radius,
        loiter_samples: params.loiter_samples,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Re-auction every `stride` steps.
    pub stride: usize,
    pub backend: CostBackend,
    pub record_bids: bool,
    pub record_trajectory: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            backend: CostBackend::ClosedForm,
            record_bids: false,
            record_trajectory: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub time: f64,
    /// `1/2 Σ ∫|u|² dt` spent so far.
    pub total_cost: f64,
    pub expected_reward: f64,
    /// Lambda-weighted cost-to-go of the current assignments.
    pub cost_to_go: f64,
    /// Expected reward minus lambda-weighted spent and remaining cost.
    pub global_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub records: Vec<MetricRecord>,
}

impl MetricsSeries {
    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    pub agent: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub status: AgentStatus,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionRecord {
    pub step: usize,
    pub time: f64,
    pub iterations: usize,
    pub trace: Option<Vec<Vec<BidState>>>,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub step: usize,
    pub time: f64,
    pub agents: Vec<AgentState>,
    pub profile: AllocationProfile,
    pub graph: CommunicationGraph,
    pub metrics: MetricsSeries,
    pub trajectory: Vec<TrajectoryRecord>,
    pub auctions: Vec<AuctionRecord>,
    /// Control applied during the last step, per agent.
    pub last_control: Vec<Vec2>,
    pub plans: Vec<Option<LoiterPlan>>,
    /// Effort spent per agent.
    pub effort: Vec<f64>,
    pub weighted_effort: f64,
    /// Time spent evaluating costs and running auctions.
    pub allocation_time: Duration,
    /// Changes of an active agent's assignment after the first auction.
    pub reassignments: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub state: SimulationState,
}

impl RunOutput {
    pub fn metrics(&self) -> &MetricsSeries {
        &self.state.metrics
    }

    pub fn final_utility(&self) -> f64 {
        self.state.metrics.last().map_or(0.0, |m| m.global_utility)
    }
}

enum Mode {
    Coast,
    Track { position: Vec2, velocity: Vec2, final_time: f64 },
    Hold,
    Circle { center: Vec2, rate: f64 },
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    config: SimConfig,
    dt: f64,
    guard: f64,
    order: Option<Vec<usize>>,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, config: SimConfig) -> Result<Self, SimError> {
        scenario.validate()?;
        if config.stride == 0 {
            return Err(SimError::Config("stride must be >= 1".into()));
        }
        if let CostBackend::Numeric { steps } = config.backend {
            if steps < 3 {
                return Err(SimError::Config("numeric backend needs >= 3 steps".into()));
            }
        }
        let dt = scenario.time_step();
        Ok(Self {
            scenario,
            config,
            dt,
            guard: 2.0 * dt,
            order: None,
        })
    }

    /// Processes agents in `order` inside each auction phase.
    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    /// Window before a terminal time in which the last control is held.
    pub fn singular_guard(&self) -> f64 {
        self.guard
    }

    pub fn cost_config(&self) -> CostConfig {
        CostConfig {
            backend: self.config.backend,
            loiter_samples: self.scenario.loiter_samples,
            min_duration: self.guard,
        }
    }

    pub fn initial_state(&self) -> Result<SimulationState, SimError> {
        let s = self.scenario;
        let n = s.agent_count();
        let positions: Vec<Vec2> = s.agents.iter().map(|a| a.position).collect();
        let profile = AllocationProfile::new(
            s.agents
                .iter()
                .map(|a| match a.status {
                    AgentStatus::Passive(j) => Assignment::Task(j),
                    AgentStatus::Active => Assignment::Null,
                })
                .collect(),
        );
        let mut state = SimulationState {
            step: 0,
            time: 0.0,
            agents: s.agents.clone(),
            profile,
            graph: build_comm_graph(&positions, s.comm_range)?,
            metrics: MetricsSeries::default(),
            trajectory: Vec::new(),
            auctions: Vec::new(),
            last_control: vec![Vec2::zeros(); n],
            plans: vec![None; n],
            effort: vec![0.0; n],
            weighted_effort: 0.0,
            allocation_time: Duration::ZERO,
            reassignments: 0,
        };
        if self.config.record_trajectory {
            self.log_positions(&mut state);
        }
        Ok(state)
    }

    /// Costs-to-go for every active agent at `time`; unreachable tasks cost `+inf`.
    pub fn cost_table(&self, agents: &[AgentState], time: f64) -> Result<CostTable, SimError> {
        let cfg = self.cost_config();
        let mut table = CostTable::new(agents.len(), self.scenario.task_count());
        for (i, agent) in agents.iter().enumerate() {
            if agent.is_passive() {
                continue;
            }
            for (j, task) in self.scenario.tasks.iter().enumerate() {
                let cost = match agent_task_cost(agent, task, time, &cfg) {
                    Ok(c) => c,
                    Err(ControlError::Infeasible { .. }) => f64::INFINITY,
                    Err(e) => return Err(e.into()),
                };
                table.set(i, j, cost);
            }
        }
        Ok(table)
    }

    /// Auction from the agents' current states with a fresh cost table.
    pub fn allocate(&self, state: &SimulationState) -> Result<(AuctionResult, CostTable), SimError> {
        let costs = self.cost_table(&state.agents, state.time)?;
        let options = AuctionOptions {
            record_trace: self.config.record_bids,
            order: self.order.clone(),
        };
        let result = run_gcaa(self.scenario, &state.agents, &state.graph, &costs, &options);
        Ok((result, costs))
    }

    pub fn step(&self, state: &mut SimulationState) -> Result<(), SimError> {
        let s = self.scenario;
        if state.step >= s.steps {
            return Err(SimError::PastHorizon {
                step: state.step,
                steps: s.steps,
            });
        }
        let t = state.time;
        let positions: Vec<Vec2> = state.agents.iter().map(|a| a.position).collect();
        state.graph = build_comm_graph(&positions, s.comm_range)?;

        if state.step % self.config.stride == 0 {
            let started = Instant::now();
            let (result, _) = self.allocate(state)?;
            state.allocation_time += started.elapsed();
            let first = state.auctions.is_empty();
            for (i, agent) in state.agents.iter().enumerate() {
                if agent.is_passive() {
                    continue;
                }
                let new = result.profile.get(i);
                if !first && new != state.profile.get(i) {
                    state.reassignments += 1;
                }
                state.profile.assignments[i] = new;
                state.plans[i] = match new {
                    Assignment::Task(j) => self.plan_for(agent, j, t),
                    Assignment::Null => None,
                };
            }
            state.auctions.push(AuctionRecord {
                step: state.step,
                time: t,
                iterations: result.iterations,
                trace: result.bid_trace,
            });
        }

        for (i, agent) in state.agents.iter_mut().enumerate() {
            if let (AgentStatus::Active, Assignment::Task(j)) = (agent.status, state.profile.get(i)) {
                if (agent.position - s.tasks[j].position).norm() < s.freeze_radius(j) {
                    agent.status = AgentStatus::Passive(j);
                }
            }
        }

        for i in 0..state.agents.len() {
            let mode = self.mode(state, i, t);
            let agent = &state.agents[i];
            let (next, effort, control) = match mode {
                Mode::Coast => {
                    let (next, e) = integrate_held(agent, Vec2::zeros(), s.drag, self.dt)?;
                    (next, e, Vec2::zeros())
                }
                Mode::Hold => {
                    let u = state.last_control[i];
                    let (next, e) = integrate_held(agent, u, s.drag, self.dt)?;
                    (next, e, u)
                }
                Mode::Track {
                    position,
                    velocity,
                    final_time,
                } => {
                    let law = tracking_law(position, velocity, final_time);
                    let (next, step) = integrate_feedback_step(agent, t, self.dt, s.drag, law)?;
                    (next, step.effort, step.control)
                }
                Mode::Circle { center, rate } => {
                    let drag = s.drag;
                    let law = move |_t: f64, p: Vec2, v: Vec2| loiter_control(p, v, center, rate, drag);
                    let (next, step) = integrate_feedback_step(agent, t, self.dt, s.drag, law)?;
                    (next, step.effort, step.control)
                }
            };
            state.agents[i] = next;
            state.last_control[i] = control;
            state.effort[i] += effort;
            if let Assignment::Task(j) = state.profile.get(i) {
                state.weighted_effort += s.tasks[j].lambda * effort;
            }
        }

        state.step += 1;
        state.time = state.step as f64 * self.dt;
        let record = self.metric_record(state)?;
        state.metrics.records.push(record);
        if self.config.record_trajectory {
            self.log_positions(state);
        }
        Ok(())
    }

    /// Runs all steps. `seed` fixes the processing order inside auction phases,
    /// which never changes the outcome.
    pub fn run(&self, seed: u64) -> Result<RunOutput, SimError> {
        let n = self.scenario.agent_count();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, Stream::ProcessingOrder, 0));
        let sim = Simulator {
            scenario: self.scenario,
            config: self.config.clone(),
            dt: self.dt,
            guard: self.guard,
            order: Some(self.order.clone().unwrap_or(order)),
        };
        let mut state = sim.initial_state()?;
        for _ in 0..self.scenario.steps {
            sim.step(&mut state)?;
        }
        Ok(RunOutput { seed, state })
    }

    fn plan_for(&self, agent: &AgentState, task: usize, now: f64) -> Option<LoiterPlan> {
        let task = &self.scenario.tasks[task];
        if !task.is_loiter() || task.terminal_time() - now <= self.guard {
            return None;
        }
        plan_loiter_entry(agent, task, now, self.scenario.loiter_samples).ok()
    }

    fn mode(&self, state: &SimulationState, i: usize, t: f64) -> Mode {
        let Assignment::Task(j) = state.profile.get(i) else {
            return Mode::Coast;
        };
        let task = &self.scenario.tasks[j];
        match task.kind {
            TaskKind::Fixed => {
                if task.completion_time - t > self.guard {
                    Mode::Track {
                        position: task.position,
                        velocity: task.terminal_velocity,
                        final_time: task.completion_time,
                    }
                } else if t < task.completion_time {
                    Mode::Hold
                } else {
                    Mode::Coast
                }
            }
            TaskKind::Loiter { loiter_time, .. } => {
                let entry = task.completion_time - loiter_time;
                if entry - t > self.guard {
                    match state.plans[i] {
                        Some(plan) => Mode::Track {
                            position: plan.entry_point,
                            velocity: plan.entry_velocity,
                            final_time: plan.entry_time,
                        },
                        None => Mode::Hold,
                    }
                } else if t < entry {
                    Mode::Hold
                } else if t < task.completion_time {
                    Mode::Circle {
                        center: task.position,
                        rate: if loiter_time > 0.0 { std::f64::consts::TAU / loiter_time } else { 0.0 },
                    }
                } else {
                    Mode::Coast
                }
            }
        }
    }

    /// Closed-form remaining effort of agent `i` under its current assignment.
    fn remaining_cost(&self, state: &SimulationState, i: usize) -> Result<f64, SimError> {
        let Assignment::Task(j) = state.profile.get(i) else {
            return Ok(0.0);
        };
        let task = &self.scenario.tasks[j];
        let agent = &state.agents[i];
        let t = state.time;
        Ok(match task.kind {
            TaskKind::Fixed => {
                if task.completion_time - t > self.guard {
                    cost_to_go(&BoundaryConditions {
                        start_position: agent.position,
                        start_velocity: agent.velocity,
                        end_position: task.position,
                        end_velocity: task.terminal_velocity,
                        duration: task.completion_time - t,
                    })?
                } else {
                    0.0
                }
            }
            TaskKind::Loiter { radius, loiter_time } => {
                let entry = task.completion_time - loiter_time;
                let loop_effort = loiter_effort(radius, loiter_time);
                if entry - t > self.guard {
                    let approach = match state.plans[i] {
                        Some(plan) => plan.cost_from(agent, t)?,
                        None => plan_loiter_entry(agent, task, t, self.scenario.loiter_samples)?.entry_cost,
                    };
                    approach + loop_effort
                } else if t < entry {
                    loop_effort
                } else if t < task.completion_time && loiter_time > 0.0 {
                    loop_effort * (task.completion_time - t) / loiter_time
                } else {
                    0.0
                }
            }
        })
    }

    fn metric_record(&self, state: &SimulationState) -> Result<MetricRecord, SimError> {
        let s = self.scenario;
        let mut reward = 0.0;
        for j in 0..s.task_count() {
            reward += expected_reward(s, &state.profile, j)?;
        }
        let mut to_go = 0.0;
        for i in 0..state.agents.len() {
            if let Assignment::Task(j) = state.profile.get(i) {
                to_go += s.tasks[j].lambda * self.remaining_cost(state, i)?;
            }
        }
        Ok(MetricRecord {
            time: state.time,
            total_cost: state.effort.iter().sum(),
            expected_reward: reward,
            cost_to_go: to_go,
            global_utility: reward - state.weighted_effort - to_go,
        })
    }

    fn log_positions(&self, state: &mut SimulationState) {
        for (i, a) in state.agents.iter().enumerate() {
            state.trajectory.push(TrajectoryRecord {
                step: state.step,
                time: state.time,
                agent: i,
                position: a.position,
                velocity: a.velocity,
                status: a.status,
                assignment: state.profile.get(i),
            });
        }
    }
}

/// Static allocation at `t = 0` from the scenario's initial states.
pub fn initial_allocation(scenario: &Scenario, backend: CostBackend) -> Result<(AuctionResult, CostTable), SimError> {
    let sim = Simulator::new(
        scenario,
        SimConfig {
            backend,
            record_trajectory: false,
            ..SimConfig::default()
        },
    )?;
    let state = sim.initial_state()?;
    sim.allocate(&state)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    CommRange(Vec<CommRange>),
    /// Fraction of loiter tasks; the count is rounded to the nearest integer.
    LoiterRatio(Vec<f64>),
    AgentsByTasks(Vec<(usize, usize)>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::CommRange(_) => "range",
            SweepAxis::LoiterRatio(_) => "loiter-ratio",
            SweepAxis::AgentsByTasks(_) => "agents-tasks",
        }
    }

    fn settings(&self, base: &GeneratorParams) -> Vec<(String, GeneratorParams)> {
        match self {
            SweepAxis::CommRange(grid) => grid
                .iter()
                .map(|&r| {
                    (r.to_string(), GeneratorParams {
                        comm_range: r,
                        ..base.clone()
                    })
                })
                .collect(),
            SweepAxis::LoiterRatio(grid) => grid
                .iter()
                .map(|&f| {
                    let loiter = (f * base.tasks as f64).round() as usize;
                    (f.to_string(), GeneratorParams {
                        loiter: loiter.min(base.tasks),
                        ..base.clone()
                    })
                })
                .collect(),
            SweepAxis::AgentsByTasks(grid) => grid
                .iter()
                .map(|&(n, p)| {
                    let ratio = if base.tasks == 0 { 0.0 } else { base.loiter as f64 / base.tasks as f64 };
                    (format!("{n}x{p}"), GeneratorParams {
                        agents: n,
                        tasks: p,
                        loiter: ((ratio * p as f64).round() as usize).min(p),
                        ..base.clone()
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub agents: usize,
    pub tasks: usize,
    pub loiter: usize,
    pub comm_range: CommRange,
    pub runs: usize,
    pub mean_utility: f64,
    pub std_utility: f64,
    /// Mean per-run allocation time (cost evaluation and auctions), seconds.
    pub mean_wall_time: f64,
    pub mean_iterations: f64,
}

/// Runs every grid point of `axis` over `seeds` and averages final utility
/// and allocation wall time. Runs execute sequentially so timings are comparable.
pub fn sweep(
    axis: &SweepAxis,
    base: &GeneratorParams,
    config: &SimConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>, SimError> {
    if seeds.is_empty() {
        return Err(SimError::Config("sweep needs at least one seed".into()));
    }
    let settings = axis.settings(base);
    if settings.is_empty() {
        return Err(SimError::Config("sweep grid is empty".into()));
    }
    let config = SimConfig {
        record_trajectory: false,
        record_bids: false,
        ..config.clone()
    };
    let mut rows = Vec::with_capacity(settings.len());
    for (label, params) in settings {
        let mut utilities = Vec::with_capacity(seeds.len());
        let mut wall = 0.0;
        let mut iterations = 0.0;
        for &seed in seeds {
            let scenario = generate_random_scenario(&params, seed)?;
            let out = Simulator::new(&scenario, config.clone())?.run(seed)?;
            utilities.push(out.final_utility());
            wall += out.state.allocation_time.as_secs_f64();
            let rounds = out.state.auctions.len().max(1) as f64;
            iterations += out.state.auctions.iter().map(|a| a.iterations as f64).sum::<f64>() / rounds;
        }
        let k = seeds.len() as f64;
        let mean = utilities.iter().sum::<f64>() / k;
        let var = utilities.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / k;
        rows.push(SweepRow {
            setting: label,
            agents: params.agents,
            tasks: params.tasks,
            loiter: params.loiter,
            comm_range: params.comm_range,
            runs: seeds.len(),
            mean_utility: mean,
            std_utility: var.sqrt(),
            mean_wall_time: wall / k,
            mean_iterations: iterations / k,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_agent_one_task(steps: usize) -> Scenario {
        let agent = AgentState::new(0, Vec2::new(0.2, 0.2), Vec2::zeros());
        let task = Task::fixed(0, Vec2::new(0.6, 0.5), 1.0, 9.5);
        Scenario::new(vec![agent], vec![task], vec![vec![0.9]], 10.0, steps)
    }

    #[test]
    fn generator_is_deterministic_and_in_range() {
        let params = GeneratorParams::default();
        let a = generate_random_scenario(&params, 11).unwrap();
        let b = generate_random_scenario(&params, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tasks.iter().filter(|t| t.is_loiter()).count(), 5);
        for t in &a.tasks {
            assert!((9.0..=10.0).contains(&t.completion_time));
            match t.kind {
                TaskKind::Fixed => {
                    assert!((0.0..=0.2).contains(&t.nominal_reward));
                    assert!(t.terminal_velocity.iter().all(|c| (-0.1..=0.1).contains(c)));
                }
                TaskKind::Loiter { radius, loiter_time } => {
                    assert!((0.0..=1.0).contains(&t.nominal_reward));
                    assert!((0.032..=0.048).contains(&radius));
                    assert!((1.5..=2.5).contains(&loiter_time));
                }
            }
        }
    }

    #[test]
    fn generator_rejects_bad_params() {
        let params = GeneratorParams {
            loiter: 11,
            ..GeneratorParams::default()
        };
        assert!(matches!(generate_random_scenario(&params, 0), Err(SimError::Config(_))));
    }

    #[test]
    fn loiter_indices_are_spread() {
        let picks: Vec<usize> = (0..10).filter(|&j| is_loiter_index(j, 5, 10)).collect();
        assert_eq!(picks, vec![1, 3, 5, 7, 9]);
        assert_eq!((0..20).filter(|&j| is_loiter_index(j, 7, 20)).count(), 7);
        assert!(!(0..4).any(|j| is_loiter_index(j, 0, 4)));
    }

    #[test]
    fn step_past_horizon_is_an_error() {
        let s = one_agent_one_task(3);
        let sim = Simulator::new(&s, SimConfig::default()).unwrap();
        let mut state = sim.initial_state().unwrap();
        for _ in 0..3 {
            sim.step(&mut state).unwrap();
        }
        assert!(matches!(sim.step(&mut state), Err(SimError::PastHorizon { .. })));
    }

    #[test]
    fn passive_agent_keeps_assignment() {
        let mut s = one_agent_one_task(50);
        s.tasks.push(Task::fixed(1, Vec2::new(0.21, 0.2), 1.0, 9.5));
        s.success_prob = vec![vec![0.9, 0.9]];
        s.agents[0].status = AgentStatus::Passive(0);
        let out = Simulator::new(&s, SimConfig::default()).unwrap().run(0).unwrap();
        assert_eq!(out.state.profile.get(0), Assignment::Task(0));
        assert_eq!(out.state.reassignments, 0);
    }

    #[test]
    fn unassigned_agent_slows_down() {
        let mut s = one_agent_one_task(10);
        s.tasks.clear();
        s.success_prob = vec![vec![]];
        s.agents[0].velocity = Vec2::new(0.1, 0.0);
        let sim = Simulator::new(&s, SimConfig::default()).unwrap();
        let mut state = sim.initial_state().unwrap();
        sim.step(&mut state).unwrap();
        assert!(state.agents[0].velocity.norm() < 0.1);
        assert_eq!(state.metrics.records[0].global_utility, 0.0);
    }

    #[test]
    fn loiter_agent_freezes_inside_double_radius() {
        let agent = AgentState::new(0, Vec2::new(0.3, 0.3), Vec2::zeros());
        let task = Task {
            kind: TaskKind::Loiter {
                radius: 0.04,
                loiter_time: 2.0,
            },
            ..Task::fixed(0, Vec2::new(0.5, 0.5), 1.0, 9.5)
        };
        let s = Scenario::new(vec![agent], vec![task], vec![vec![0.9]], 10.0, 500);
        let out = Simulator::new(&s, SimConfig::default()).unwrap().run(0).unwrap();
        let traj = &out.state.trajectory;
        let frozen_at = traj
            .iter()
            .position(|r| r.status == AgentStatus::Passive(0))
            .expect("agent should freeze");
        assert!(traj[frozen_at..].iter().all(|r| r.status == AgentStatus::Passive(0)));
        // Frozen once within 2R of the target, before the loiter starts.
        let before = &traj[frozen_at - 1];
        assert!((before.position - Vec2::new(0.5, 0.5)).norm() < 0.08 + 1e-3);
        assert!(before.time < 7.5);
    }

    #[test]
    fn sweep_single_point_matches_direct_run() {
        let base = GeneratorParams {
            agents: 3,
            tasks: 3,
            loiter: 1,
            steps: 40,
            ..GeneratorParams::default()
        };
        let rows = sweep(&SweepAxis::CommRange(vec![CommRange::Unlimited]), &base, &SimConfig::default(), &[5]).unwrap();
        assert_eq!(rows.len(), 1);
        let scenario = generate_random_scenario(
            &GeneratorParams {
                comm_range: CommRange::Unlimited,
                ..base
            },
            5,
        )
        .unwrap();
        let direct = Simulator::new(&scenario, SimConfig::default()).unwrap().run(5).unwrap();
        assert_eq!(rows[0].mean_utility, direct.final_utility());
        assert_eq!(rows[0].std_utility, 0.0);
    }
}
