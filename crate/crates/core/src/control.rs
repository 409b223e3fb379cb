//! Minimum-effort control of planar double-integrator agents.
//!
//! The optimal input steering `(p, v)` to `(p_T, v_T)` in time `T` with
//! effort `1/2 ∫|u|² dt` is the feedback law
//!
//! ```text
//! u(t) = 4/(t_f - t) (v_T - v) + 6/(t_f - t)² (p_T - p - v_T (t_f - t))
//! ```
//!
//! whose closed-loop trajectory is the Hermite cubic through the boundary
//! conditions. Its effort has the closed form
//! `2|Δv|²/T - 6 Δv·Δp/T² + 6|Δp|²/T³` with `Δv = v_T - v` and
//! `Δp = p_T - p - v T`.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::model::{AgentState, Task, TaskKind};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("control law singular: {remaining} time left is within the guard {guard}")]
    Singular { remaining: f64, guard: f64 },
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("loiter entry at {entry_time} already passed (now {now})")]
    TooLate { now: f64, entry_time: f64 },
    #[error("task {0} is not a loiter task")]
    NotLoiter(usize),
    #[error("task {task} cannot be reached before t = {deadline} (now {now})")]
    Infeasible { task: usize, now: f64, deadline: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub start_position: Vec2,
    pub start_velocity: Vec2,
    pub end_position: Vec2,
    pub end_velocity: Vec2,
    pub duration: f64,
}

impl BoundaryConditions {
    fn check(&self) -> Result<(), ControlError> {
        if !self.duration.is_finite() {
            return Err(ControlError::NonFinite("duration"));
        }
        if self.duration <= 0.0 {
            return Err(ControlError::NonPositiveDuration(self.duration));
        }
        let finite = [
            self.start_position,
            self.start_velocity,
            self.end_position,
            self.end_velocity,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(ControlError::NonFinite("boundary condition"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLawParams {
    pub position: Vec2,
    pub velocity: Vec2,
    pub target_position: Vec2,
    pub target_velocity: Vec2,
    pub time: f64,
    pub final_time: f64,
}

/// Optimal feedback acceleration. Fails inside `singular_guard` of the final time.
pub fn control_law(params: &ControlLawParams, singular_guard: f64) -> Result<Vec2, ControlError> {
    let remaining = params.final_time - params.time;
    if !(remaining > singular_guard) {
        return Err(ControlError::Singular {
            remaining,
            guard: singular_guard,
        });
    }
    Ok(feedback(
        params.position,
        params.velocity,
        params.target_position,
        params.target_velocity,
        remaining,
    ))
}

#[inline]
fn feedback(p: Vec2, v: Vec2, p_t: Vec2, v_t: Vec2, remaining: f64) -> Vec2 {
    (v_t - v) * (4.0 / remaining) + (p_t - p - v_t * remaining) * (6.0 / (remaining * remaining))
}

/// Closed-form minimum effort `1/2 ∫|u*|² dt`.
pub fn cost_to_go(bc: &BoundaryConditions) -> Result<f64, ControlError> {
    bc.check()?;
    let t = bc.duration;
    let dv = bc.end_velocity - bc.start_velocity;
    let dp = bc.end_position - bc.start_position - bc.start_velocity * t;
    let cost = 2.0 * dv.norm_squared() / t - 6.0 * dv.dot(&dp) / (t * t)
        + 6.0 * dp.norm_squared() / (t * t * t);
    // The quadratic form is positive definite; clamp rounding noise.
    Ok(cost.max(0.0))
}

/// Effort obtained by integrating the closed-loop feedback law with `steps`
/// fixed RK4 steps. Over the last two steps, where the gains blow up, the
/// control is held at its value at the start of that window.
pub fn cost_to_go_numeric(bc: &BoundaryConditions, steps: usize) -> Result<f64, ControlError> {
    bc.check()?;
    let steps = steps.max(3);
    let dt = bc.duration / steps as f64;
    let (p_t, v_t, t_f) = (bc.end_position, bc.end_velocity, bc.duration);
    let law = |t: f64, p: Vec2, v: Vec2| feedback(p, v, p_t, v_t, t_f - t);
    let (mut p, mut v) = (bc.start_position, bc.start_velocity);
    let mut effort = 0.0;
    for k in 0..steps - 2 {
        let step = rk4(p, v, k as f64 * dt, dt, 0.0, law);
        p = step.position;
        v = step.velocity;
        effort += step.effort;
    }
    let held = law((steps - 2) as f64 * dt, p, v);
    effort += held.norm_squared() * dt;
    Ok(effort)
}

/// How costs-to-go are evaluated during allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostBackend {
    #[default]
    ClosedForm,
    /// Numerical integration of the closed-loop dynamics with this many RK4 steps.
    Numeric { steps: usize },
}

impl CostBackend {
    pub fn evaluate(self, bc: &BoundaryConditions) -> Result<f64, ControlError> {
        match self {
            CostBackend::ClosedForm => cost_to_go(bc),
            CostBackend::Numeric { steps } => cost_to_go_numeric(bc, steps),
        }
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub position: Vec2,
    pub velocity: Vec2,
    /// `1/2 ∫|u|² dt` over the step.
    pub effort: f64,
    /// Control at the start of the step.
    pub control: Vec2,
}

/// Classic RK4 for `p' = v, v' = u(t, p, v) - drag v`, with the effort
/// `1/2 |u|²` carried as an extra state.
fn rk4(p: Vec2, v: Vec2, t: f64, dt: f64, drag: f64, control: impl Fn(f64, Vec2, Vec2) -> Vec2) -> Step {
    let h2 = dt / 2.0;
    let u1 = control(t, p, v);
    let a1 = u1 - v * drag;
    let (p2, v2) = (p + v * h2, v + a1 * h2);
    let u2 = control(t + h2, p2, v2);
    let a2 = u2 - v2 * drag;
    let (p3, v3) = (p + v2 * h2, v + a2 * h2);
    let u3 = control(t + h2, p3, v3);
    let a3 = u3 - v3 * drag;
    let (p4, v4) = (p + v3 * dt, v + a3 * dt);
    let u4 = control(t + dt, p4, v4);
    let a4 = u4 - v4 * drag;
    let sixth = dt / 6.0;
    Step {
        position: p + (v + v2 * 2.0 + v3 * 2.0 + v4) * sixth,
        velocity: v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * sixth,
        effort: 0.5
            * sixth
            * (u1.norm_squared() + 2.0 * u2.norm_squared() + 2.0 * u3.norm_squared() + u4.norm_squared()),
        control: u1,
    }
}

fn check_step_inputs(state: &AgentState, dt: f64, drag: f64) -> Result<(), ControlError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ControlError::NonPositiveDuration(dt));
    }
    if !drag.is_finite() {
        return Err(ControlError::NonFinite("drag"));
    }
    if !state.position.iter().chain(state.velocity.iter()).all(|x| x.is_finite()) {
        return Err(ControlError::NonFinite("agent state"));
    }
    Ok(())
}

/// Advances `p'' = accel - drag p'` by one RK4 step with the control held constant.
pub fn integrate_step(
    state: &AgentState,
    accel: Vec2,
    drag: f64,
    dt: f64,
) -> Result<AgentState, ControlError> {
    Ok(integrate_held(state, accel, drag, dt)?.0)
}

/// Like [`integrate_step`], also returning the effort spent.
pub fn integrate_held(
    state: &AgentState,
    accel: Vec2,
    drag: f64,
    dt: f64,
) -> Result<(AgentState, f64), ControlError> {
    check_step_inputs(state, dt, drag)?;
    if !accel.iter().all(|x| x.is_finite()) {
        return Err(ControlError::NonFinite("acceleration"));
    }
    let step = rk4(state.position, state.velocity, 0.0, dt, drag, |_, _, _| accel);
    Ok((advance(state, &step), step.effort))
}

/// One RK4 step of the closed-loop system under a state feedback `control(t, p, v)`.
pub fn integrate_feedback_step(
    state: &AgentState,
    time: f64,
    dt: f64,
    drag: f64,
    control: impl Fn(f64, Vec2, Vec2) -> Vec2,
) -> Result<(AgentState, Step), ControlError> {
    check_step_inputs(state, dt, drag)?;
    let step = rk4(state.position, state.velocity, time, dt, drag, control);
    if !step.position.iter().chain(step.velocity.iter()).all(|x| x.is_finite()) {
        return Err(ControlError::NonFinite("integrated state"));
    }
    Ok((advance(state, &step), step))
}

/// Feedback toward `(target_position, target_velocity)` at `final_time`,
/// usable as the `control` argument of [`integrate_feedback_step`].
pub fn tracking_law(
    target_position: Vec2,
    target_velocity: Vec2,
    final_time: f64,
) -> impl Fn(f64, Vec2, Vec2) -> Vec2 {
    move |t, p, v| feedback(p, v, target_position, target_velocity, final_time - t)
}

fn advance(state: &AgentState, step: &Step) -> AgentState {
    AgentState {
        position: step.position,
        velocity: step.velocity,
        ..state.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    CounterClockwise,
    Clockwise,
}

impl Rotation {
    pub fn sign(self) -> f64 {
        match self {
            Rotation::CounterClockwise => 1.0,
            Rotation::Clockwise => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoiterPlan {
    pub task: usize,
    pub center: Vec2,
    pub radius: f64,
    pub entry_point: Vec2,
    /// Tangent to the circle, magnitude `radius * angular_rate`.
    pub entry_velocity: Vec2,
    pub entry_time: f64,
    pub angular_direction: Rotation,
    /// One loop per loiter time.
    pub angular_rate: f64,
    /// Index of the chosen point among the sampled candidates.
    pub sample: usize,
    /// Cost-to-go from the planning state to the entry state.
    pub entry_cost: f64,
}

impl LoiterPlan {
    /// Cost-to-go from `state` at `now` to this plan's entry state.
    pub fn cost_from(&self, state: &AgentState, now: f64) -> Result<f64, ControlError> {
        cost_to_go(&BoundaryConditions {
            start_position: state.position,
            start_velocity: state.velocity,
            end_position: self.entry_point,
            end_velocity: self.entry_velocity,
            duration: self.entry_time - now,
        })
    }
}

/// Effort of circling at `radius` once in `loiter_time`, drag excluded:
/// `1/2 (ω² R)² τ` with `ω = 2π/τ`.
pub fn loiter_effort(radius: f64, loiter_time: f64) -> f64 {
    if loiter_time <= 0.0 {
        return 0.0;
    }
    let omega = TAU / loiter_time;
    let accel = omega * omega * radius;
    0.5 * accel * accel * loiter_time
}

/// Centripetal control keeping an agent on its circle, compensating drag.
pub fn loiter_control(position: Vec2, velocity: Vec2, center: Vec2, angular_rate: f64, drag: f64) -> Vec2 {
    -(position - center) * (angular_rate * angular_rate) + velocity * drag
}

/// Picks the cheapest of `samples` equally spaced entry points on the loiter
/// circle (both directions of travel), using the closed-form cost.
pub fn plan_loiter_entry(
    agent: &AgentState,
    task: &Task,
    now: f64,
    samples: usize,
) -> Result<LoiterPlan, ControlError> {
    plan_loiter_entry_with(agent, task, now, samples, CostBackend::ClosedForm)
}

pub fn plan_loiter_entry_with(
    agent: &AgentState,
    task: &Task,
    now: f64,
    samples: usize,
    backend: CostBackend,
) -> Result<LoiterPlan, ControlError> {
    let TaskKind::Loiter {
        radius,
        loiter_time,
    } = task.kind
    else {
        return Err(ControlError::NotLoiter(task.id));
    };
    let entry_time = task.completion_time - loiter_time;
    if !(now < entry_time) {
        return Err(ControlError::TooLate { now, entry_time });
    }
    let angular_rate = if loiter_time > 0.0 { TAU / loiter_time } else { 0.0 };
    let speed = radius * angular_rate;
    let mut best: Option<LoiterPlan> = None;
    for k in 0..samples.max(1) {
        let theta = TAU * k as f64 / samples.max(1) as f64;
        let radial = Vec2::new(theta.cos(), theta.sin());
        let tangent = Vec2::new(-theta.sin(), theta.cos());
        let entry_point = task.position + radial * radius;
        for rotation in [Rotation::CounterClockwise, Rotation::Clockwise] {
            let entry_velocity = tangent * (speed * rotation.sign());
            let cost = backend.evaluate(&BoundaryConditions {
                start_position: agent.position,
                start_velocity: agent.velocity,
                end_position: entry_point,
                end_velocity: entry_velocity,
                duration: entry_time - now,
            })?;
            if best.as_ref().map_or(true, |b| cost < b.entry_cost) {
                best = Some(LoiterPlan {
                    task: task.id,
                    center: task.position,
                    radius,
                    entry_point,
                    entry_velocity,
                    entry_time,
                    angular_direction: rotation,
                    angular_rate,
                    sample: k,
                    entry_cost: cost,
                });
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    pub backend: CostBackend,
    pub loiter_samples: usize,
    /// Minimum time-to-go for a terminal constraint to count as reachable.
    pub min_duration: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            backend: CostBackend::ClosedForm,
            loiter_samples: crate::model::DEFAULT_LOITER_SAMPLES,
            min_duration: 0.0,
        }
    }
}

/// Cost-to-go for `agent` to satisfy `task` from its state at `now`.
///
/// Loiter tasks add the loop effort to the best entry cost. Tasks whose
/// terminal time is within `min_duration` of `now` are
/// [`ControlError::Infeasible`].
pub fn agent_task_cost(
    agent: &AgentState,
    task: &Task,
    now: f64,
    config: &CostConfig,
) -> Result<f64, ControlError> {
    let deadline = task.terminal_time();
    if !(deadline - now > config.min_duration.max(0.0)) {
        return Err(ControlError::Infeasible {
            task: task.id,
            now,
            deadline,
        });
    }
    match task.kind {
        TaskKind::Fixed => config.backend.evaluate(&BoundaryConditions {
            start_position: agent.position,
            start_velocity: agent.velocity,
            end_position: task.position,
            end_velocity: task.terminal_velocity,
            duration: deadline - now,
        }),
        TaskKind::Loiter {
            radius,
            loiter_time,
        } => {
            let plan = plan_loiter_entry_with(agent, task, now, config.loiter_samples, config.backend)?;
            Ok(plan.entry_cost + loiter_effort(radius, loiter_time))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bc1d(d: f64, t: f64) -> BoundaryConditions {
        BoundaryConditions {
            start_position: Vec2::zeros(),
            start_velocity: Vec2::zeros(),
            end_position: Vec2::new(d, 0.0),
            end_velocity: Vec2::zeros(),
            duration: t,
        }
    }

    #[test]
    fn law_vanishes_at_target() {
        let p = Vec2::new(0.3, -0.2);
        let u = control_law(
            &ControlLawParams {
                position: p,
                velocity: Vec2::zeros(),
                target_position: p,
                target_velocity: Vec2::zeros(),
                time: 1.0,
                final_time: 3.0,
            },
            0.0,
        )
        .unwrap();
        assert_eq!(u, Vec2::zeros());
    }

    #[test]
    fn law_rest_to_rest_unit() {
        let u = control_law(
            &ControlLawParams {
                position: Vec2::zeros(),
                velocity: Vec2::zeros(),
                target_position: Vec2::new(1.0, 0.0),
                target_velocity: Vec2::zeros(),
                time: 0.0,
                final_time: 1.0,
            },
            0.0,
        )
        .unwrap();
        assert_eq!(u, Vec2::new(6.0, 0.0));
    }

    #[test]
    fn law_rejects_singular_window() {
        let params = ControlLawParams {
            position: Vec2::zeros(),
            velocity: Vec2::zeros(),
            target_position: Vec2::new(1.0, 0.0),
            target_velocity: Vec2::zeros(),
            time: 0.995,
            final_time: 1.0,
        };
        assert!(matches!(control_law(&params, 0.01), Err(ControlError::Singular { .. })));
        assert!(control_law(&params, 0.001).is_ok());
    }

    #[test]
    fn closed_form_cost_examples() {
        assert_eq!(cost_to_go(&bc1d(0.0, 2.0)).unwrap(), 0.0);
        assert_relative_eq!(cost_to_go(&bc1d(1.0, 1.0)).unwrap(), 6.0, max_relative = 1e-12);
        assert!(matches!(
            cost_to_go(&bc1d(1.0, 0.0)),
            Err(ControlError::NonPositiveDuration(_))
        ));
        assert!(matches!(
            cost_to_go(&bc1d(1.0, -1.0)),
            Err(ControlError::NonPositiveDuration(_))
        ));
    }

    #[test]
    fn cost_is_translation_invariant() {
        let bc = BoundaryConditions {
            start_position: Vec2::new(0.1, 0.4),
            start_velocity: Vec2::new(0.05, -0.02),
            end_position: Vec2::new(0.7, 0.2),
            end_velocity: Vec2::new(-0.1, 0.03),
            duration: 4.0,
        };
        let shift = Vec2::new(-3.0, 12.5);
        let moved = BoundaryConditions {
            start_position: bc.start_position + shift,
            end_position: bc.end_position + shift,
            ..bc
        };
        assert_relative_eq!(cost_to_go(&bc).unwrap(), cost_to_go(&moved).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn numeric_backend_tracks_closed_form() {
        let bc = BoundaryConditions {
            start_position: Vec2::new(0.1, 0.4),
            start_velocity: Vec2::new(0.05, -0.02),
            end_position: Vec2::new(0.7, 0.2),
            end_velocity: Vec2::new(-0.1, 0.03),
            duration: 4.0,
        };
        let exact = cost_to_go(&bc).unwrap();
        let numeric = cost_to_go_numeric(&bc, 400).unwrap();
        assert_relative_eq!(numeric, exact, max_relative = 1e-3);
    }

    #[test]
    fn uniform_motion_without_control() {
        let s = AgentState::new(0, Vec2::new(1.0, 2.0), Vec2::new(0.5, -0.25));
        let next = integrate_step(&s, Vec2::zeros(), 0.0, 0.1).unwrap();
        assert_relative_eq!(next.position, Vec2::new(1.05, 1.975), epsilon = 1e-15);
        assert_eq!(next.velocity, s.velocity);
    }

    #[test]
    fn drag_slows_coasting_agent() {
        let s = AgentState::new(0, Vec2::zeros(), Vec2::new(1.0, 0.0));
        let next = integrate_step(&s, Vec2::zeros(), 0.1, 0.01).unwrap();
        assert!(next.velocity.norm() < 1.0);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        let mut s = AgentState::new(0, Vec2::zeros(), Vec2::zeros());
        let dt = 1e-4;
        for _ in 0..10_000 {
            s = integrate_step(&s, Vec2::new(1.0, 0.0), 0.0, dt).unwrap();
        }
        assert_relative_eq!(s.position, Vec2::new(0.5, 0.0), epsilon = 1e-6);
        assert_relative_eq!(s.velocity, Vec2::new(1.0, 0.0), epsilon = 1e-6);
    }

    #[test]
    fn integrate_rejects_bad_inputs() {
        let s = AgentState::new(0, Vec2::new(f64::NAN, 0.0), Vec2::zeros());
        assert!(matches!(integrate_step(&s, Vec2::zeros(), 0.0, 0.1), Err(ControlError::NonFinite(_))));
        let s = AgentState::new(0, Vec2::zeros(), Vec2::zeros());
        assert!(integrate_step(&s, Vec2::new(f64::INFINITY, 0.0), 0.0, 0.1).is_err());
        assert!(integrate_step(&s, Vec2::zeros(), 0.0, 0.0).is_err());
    }

    fn loiter_task(radius: f64, tau: f64) -> Task {
        Task {
            kind: TaskKind::Loiter {
                radius,
                loiter_time: tau,
            },
            ..Task::fixed(0, Vec2::new(0.5, 0.5), 1.0, 10.0)
        }
    }

    #[test]
    fn loiter_plan_geometry() {
        let task = loiter_task(0.04, 2.0);
        let agent = AgentState::new(0, Vec2::new(0.1, 0.2), Vec2::zeros());
        let plan = plan_loiter_entry(&agent, &task, 0.0, 10).unwrap();
        assert_relative_eq!((plan.entry_point - task.position).norm(), 0.04, epsilon = 1e-9);
        assert_relative_eq!(plan.entry_velocity.norm(), 0.04 * TAU / 2.0, epsilon = 1e-12);
        assert_relative_eq!(plan.entry_velocity.dot(&(plan.entry_point - task.position)), 0.0, epsilon = 1e-12);
        assert_eq!(plan.entry_time, 8.0);
    }

    #[test]
    fn loiter_single_sample_and_errors() {
        let task = loiter_task(0.04, 2.0);
        let agent = AgentState::new(0, Vec2::new(0.1, 0.2), Vec2::zeros());
        let plan = plan_loiter_entry(&agent, &task, 0.0, 1).unwrap();
        assert_eq!(plan.sample, 0);
        assert_relative_eq!(plan.entry_point, Vec2::new(0.54, 0.5), epsilon = 1e-12);
        assert!(matches!(
            plan_loiter_entry(&agent, &task, 8.0, 10),
            Err(ControlError::TooLate { .. })
        ));
        let fixed = Task::fixed(3, Vec2::zeros(), 1.0, 5.0);
        assert_eq!(plan_loiter_entry(&agent, &fixed, 0.0, 10), Err(ControlError::NotLoiter(3)));
    }

    #[test]
    fn agent_cost_examples() {
        let cfg = CostConfig::default();
        let task = Task::fixed(0, Vec2::new(0.5, 0.0), 1.0, 5.0);
        let at = AgentState::new(0, Vec2::new(0.5, 0.0), Vec2::zeros());
        assert_eq!(agent_task_cost(&at, &task, 1.0, &cfg).unwrap(), 0.0);
        let origin = AgentState::new(0, Vec2::zeros(), Vec2::zeros());
        assert_relative_eq!(agent_task_cost(&origin, &task, 0.0, &cfg).unwrap(), 0.012, max_relative = 1e-12);
        assert!(matches!(
            agent_task_cost(&origin, &task, 5.0, &cfg),
            Err(ControlError::Infeasible { .. })
        ));

        let loiter = loiter_task(0.04, 2.0);
        let plan = plan_loiter_entry(&origin, &loiter, 0.0, 10).unwrap();
        let total = agent_task_cost(&origin, &loiter, 0.0, &cfg).unwrap();
        assert!(total >= plan.entry_cost);
        assert_relative_eq!(total - plan.entry_cost, loiter_effort(0.04, 2.0), max_relative = 1e-9);
    }

    #[test]
    fn loiter_effort_convention() {
        // omega = pi, a = pi^2 * 0.04, effort = 0.5 a^2 * 2
        let a = std::f64::consts::PI.powi(2) * 0.04;
        assert_relative_eq!(loiter_effort(0.04, 2.0), a * a, max_relative = 1e-12);
        assert_eq!(loiter_effort(0.04, 0.0), 0.0);
    }
}
