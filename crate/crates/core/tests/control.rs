use gcaa_core::control::{
    cost_to_go_numeric, integrate_feedback_step, integrate_held, loiter_control, loiter_effort, tracking_law,
};
use gcaa_core::oracle::open_loop_effort;
use gcaa_core::{
    control_law, cost_to_go, plan_loiter_entry, AgentState, BoundaryConditions, ControlLawParams, Task, TaskKind, Vec2,
};
use proptest::prelude::*;

fn vec2() -> impl Strategy<Value = Vec2> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| Vec2::new(x, y))
}

fn boundary() -> impl Strategy<Value = BoundaryConditions> {
    (vec2(), vec2(), vec2(), vec2(), 0.5f64..5.0).prop_map(|(p0, v0, p1, v1, t)| BoundaryConditions {
        start_position: p0,
        start_velocity: v0,
        end_position: p1,
        end_velocity: v1,
        duration: t,
    })
}

/// Closed loop with `steps` RK4 steps, holding the control over the last two.
pub fn fly(bc: &BoundaryConditions, steps: usize, drag: f64) -> AgentState {
    let dt = bc.duration / steps as f64;
    let mut state = AgentState::new(0, bc.start_position, bc.start_velocity);
    let law = tracking_law(bc.end_position, bc.end_velocity, bc.duration);
    let mut last = Vec2::zeros();
    for k in 0..steps {
        let t = k as f64 * dt;
        if k + 2 < steps {
            let (next, step) = integrate_feedback_step(&state, t, dt, drag, &law).unwrap();
            state = next;
            last = step.control;
        } else {
            if k + 2 == steps {
                last = law(t, state.position, state.velocity);
            }
            state = integrate_held(&state, last, drag, dt).unwrap().0;
        }
    }
    state
}

#[test]
fn rest_to_rest_unit_move() {
    let bc = BoundaryConditions {
        start_position: Vec2::zeros(),
        start_velocity: Vec2::zeros(),
        end_position: Vec2::new(1.0, 0.0),
        end_velocity: Vec2::zeros(),
        duration: 1.0,
    };
    assert!((cost_to_go(&bc).unwrap() - 6.0).abs() < 1e-9);
    assert!((open_loop_effort(&bc, 10).unwrap() - 6.0).abs() < 1e-9);
}

#[test]
fn loiter_control_keeps_circle() {
    let task = Task {
        kind: TaskKind::Loiter {
            radius: 0.04,
            loiter_time: 2.0,
        },
        ..Task::fixed(0, Vec2::new(0.5, 0.5), 1.0, 9.0)
    };
    let agent = AgentState::new(0, Vec2::new(0.1, 0.1), Vec2::zeros());
    let plan = plan_loiter_entry(&agent, &task, 0.0, 10).unwrap();
    let mut state = AgentState::new(0, plan.entry_point, plan.entry_velocity);
    let dt = 2.0 / 1000.0;
    let mut effort = 0.0;
    for k in 0..1000 {
        let law = |_t: f64, p: Vec2, v: Vec2| loiter_control(p, v, plan.center, plan.angular_rate, 0.0);
        let (next, step) = integrate_feedback_step(&state, k as f64 * dt, dt, 0.0, law).unwrap();
        state = next;
        effort += step.effort;
        assert!(((state.position - plan.center).norm() - 0.04).abs() < 1e-6);
    }
    assert!((state.position - plan.entry_point).norm() < 1e-6);
    assert!((effort - loiter_effort(0.04, 2.0)).abs() < 1e-8);
}

proptest! {
    #[test]
    fn law_is_cubic_acceleration(bc in boundary(), frac in 0.0f64..0.9) {
        let t = bc.duration;
        let s = frac * t;
        // Cubic through the boundary conditions, evaluated at s.
        let dp = bc.end_position - bc.start_position;
        let a2 = (dp * 3.0 - (bc.start_velocity * 2.0 + bc.end_velocity) * t) / (t * t);
        let a3 = ((bc.start_velocity + bc.end_velocity) * t - dp * 2.0) / (t * t * t);
        let pos = bc.start_position + bc.start_velocity * s + a2 * s * s + a3 * s * s * s;
        let vel = bc.start_velocity + a2 * (2.0 * s) + a3 * (3.0 * s * s);
        let acc = a2 * 2.0 + a3 * (6.0 * s);
        let u = control_law(&ControlLawParams {
            position: pos,
            velocity: vel,
            target_position: bc.end_position,
            target_velocity: bc.end_velocity,
            time: s,
            final_time: t,
        }, 1e-9).unwrap();
        prop_assert!((u - acc).norm() < 1e-9 * (1.0 + acc.norm()), "{} vs {}", u, acc);
    }

    #[test]
    fn closed_form_matches_open_loop_oracle(bc in boundary()) {
        let exact = cost_to_go(&bc).unwrap();
        let oracle = open_loop_effort(&bc, 64).unwrap();
        prop_assert!((exact - oracle).abs() <= 1e-9 * (1.0 + oracle));
    }

    #[test]
    fn cost_is_translation_invariant(bc in boundary(), shift in vec2()) {
        let moved = BoundaryConditions {
            start_position: bc.start_position + shift,
            end_position: bc.end_position + shift,
            ..bc
        };
        prop_assert!((cost_to_go(&bc).unwrap() - cost_to_go(&moved).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn longer_horizon_is_cheaper_rest_to_rest(d in 0.01f64..1.0, t in 0.5f64..5.0) {
        let bc = BoundaryConditions {
            start_position: Vec2::zeros(),
            start_velocity: Vec2::zeros(),
            end_position: Vec2::new(d, 0.0),
            end_velocity: Vec2::zeros(),
            duration: t,
        };
        let slower = BoundaryConditions { duration: t * 1.5, ..bc };
        prop_assert!(cost_to_go(&slower).unwrap() < cost_to_go(&bc).unwrap());
        prop_assert!((cost_to_go(&bc).unwrap() - 6.0 * d * d / (t * t * t)).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn numeric_backend_agrees(bc in boundary()) {
        let exact = cost_to_go(&bc).unwrap();
        let numeric = cost_to_go_numeric(&bc, 10_000).unwrap();
        prop_assert!((numeric - exact).abs() <= 1e-4 * exact.max(1e-12), "{} vs {}", numeric, exact);
    }

    #[test]
    fn closed_loop_reaches_target(bc in boundary()) {
        let end = fly(&bc, 10_000, 0.0);
        prop_assert!((end.position - bc.end_position).norm() < 1e-3);
        prop_assert!((end.velocity - bc.end_velocity).norm() < 1e-3);
    }
}
