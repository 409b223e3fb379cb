//! Brute-force references used to check the fast paths in tests.

use rand::Rng;
use thiserror::Error;

use crate::control::BoundaryConditions;
use crate::model::{expected_reward, global_utility, AllocationProfile, Assignment, CostTable, ModelError, Scenario};
use crate::seeding::{substream, Stream};
use crate::Vec2;

/// Largest number of profiles [`exhaustive_optimum`] will enumerate.
pub const MAX_PROFILES: f64 = 1e6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{profiles} profiles exceed the enumeration limit")]
    TooLarge { profiles: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("duration must be > 0")]
    Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub profile: AllocationProfile,
    pub utility: f64,
    pub evaluated: usize,
}

/// Enumerates every assignment of `n` agents to `p` tasks or Null.
pub fn exhaustive_optimum(scenario: &Scenario, costs: &CostTable) -> Result<OracleResult, OracleError> {
    let n = scenario.agent_count();
    let base = scenario.task_count() + 1;
    let profiles = (base as f64).powi(n as i32);
    if profiles > MAX_PROFILES {
        return Err(OracleError::TooLarge { profiles });
    }
    let mut digits = vec![0usize; n];
    let mut best: Option<(AllocationProfile, f64)> = None;
    let mut evaluated = 0;
    loop {
        let profile = AllocationProfile::new(
            digits
                .iter()
                .map(|&d| if d == 0 { Assignment::Null } else { Assignment::Task(d - 1) })
                .collect(),
        );
        let u = global_utility(scenario, &profile, costs)?;
        evaluated += 1;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((profile, u));
        }
        let mut k = 0;
        while k < n {
            digits[k] += 1;
            if digits[k] < base {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    let (profile, utility) = best.expect("at least one profile");
    Ok(OracleResult {
        profile,
        utility,
        evaluated,
    })
}

/// Marginal utility as the difference of global utilities with and without the agent.
pub fn brute_marginal(
    scenario: &Scenario,
    profile: &AllocationProfile,
    agent: usize,
    costs: &CostTable,
) -> Result<f64, OracleError> {
    Ok(global_utility(scenario, profile, costs)? - global_utility(scenario, &profile.without(agent), costs)?)
}

/// Sampled reward of `task` under `profile`: mean and standard error.
pub fn monte_carlo_reward(
    scenario: &Scenario,
    profile: &AllocationProfile,
    task: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), OracleError> {
    expected_reward(scenario, profile, task)?;
    let members: Vec<usize> = profile.members(task).collect();
    let mut rng = substream(seed, Stream::MonteCarlo, task as u64);
    let reward = scenario.tasks[task].nominal_reward;
    let mut hits = 0usize;
    for _ in 0..samples {
        if members.iter().any(|&i| rng.random::<f64>() < scenario.success(i, task)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples.max(1) as f64;
    let stderr = reward * (frac * (1.0 - frac) / samples.max(1) as f64).sqrt();
    Ok((reward * frac, stderr))
}

/// Effort of the open-loop minimum-effort input `u(t) = a + b t` that meets
/// the boundary conditions without drag, integrated with Simpson's rule.
pub fn open_loop_effort(bc: &BoundaryConditions, intervals: usize) -> Result<f64, OracleError> {
    let t = bc.duration;
    if !(t > 0.0) {
        return Err(OracleError::Duration);
    }
    // p_T = p0 + v0 T + a T²/2 + b T³/6 and v_T = v0 + a T + b T²/2
    let dp = bc.end_position - bc.start_position - bc.start_velocity * t;
    let dv = bc.end_velocity - bc.start_velocity;
    let det = t * t * t * t / 4.0 - t * t * t * t / 6.0;
    let a: Vec2 = (dp * (t * t / 2.0) - dv * (t * t * t / 6.0)) / det;
    let b: Vec2 = (dv * (t * t / 2.0) - dp * t) / det;
    let m = intervals.max(2) & !1;
    let h = t / m as f64;
    let f = |s: f64| 0.5 * (a + b * s).norm_squared();
    let mut sum = f(0.0) + f(t);
    for k in 1..m {
        sum += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(sum * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_loop_rest_to_rest() {
        let bc = BoundaryConditions {
            start_position: Vec2::zeros(),
            start_velocity: Vec2::zeros(),
            end_position: Vec2::new(1.0, 0.0),
            end_velocity: Vec2::zeros(),
            duration: 1.0,
        };
        assert!((open_loop_effort(&bc, 100).unwrap() - 6.0).abs() < 1e-9);
    }
}
