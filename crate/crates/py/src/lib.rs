//! Python bindings: scenarios, one-shot allocation, full simulation and the
//! control primitives.

use gcaa_cli::config::{parse_backend, parse_range, scenario_to_toml};
use gcaa_cli::{parse_config, CliError};
use gcaa_core::model::{self, AllocationProfile, Assignment};
use gcaa_core::simulator::initial_allocation;
use gcaa_core::{
    generate_random_scenario, BoundaryConditions, ControlLawParams, GeneratorParams, SimConfig, Simulator, Vec2,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: impl Into<CliError>) -> PyErr {
    let e = e.into();
    match e {
        CliError::Parse { .. } | CliError::Validation { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn guard(e: gcaa_core::ControlError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn profile_list(p: &AllocationProfile) -> Vec<Option<usize>> {
    p.assignments.iter().map(|a| a.task()).collect()
}

fn profile_from(list: Vec<Option<usize>>) -> AllocationProfile {
    AllocationProfile::new(
        list.into_iter()
            .map(|a| a.map_or(Assignment::Null, Assignment::Task))
            .collect(),
    )
}

#[pyclass(name = "Scenario", module = "gcaa", frozen)]
pub struct PyScenario {
    inner: model::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Parses a TOML document with a `[scenario]` or `[generate]` table.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let (_, inner) = parse_config(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        scenario_to_toml(&self.inner).map_err(to_py)
    }

    #[getter]
    fn agent_count(&self) -> usize {
        self.inner.agent_count()
    }

    #[getter]
    fn task_count(&self) -> usize {
        self.inner.task_count()
    }

    #[getter]
    fn loiter_tasks(&self) -> Vec<usize> {
        self.inner.tasks.iter().filter(|t| t.is_loiter()).map(|t| t.id).collect()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn success_prob(&self) -> Vec<Vec<f64>> {
        self.inner.success_prob.clone()
    }

    #[getter]
    fn agent_positions(&self) -> Vec<(f64, f64)> {
        self.inner.agents.iter().map(|a| (a.position.x, a.position.y)).collect()
    }

    #[getter]
    fn task_positions(&self) -> Vec<(f64, f64)> {
        self.inner.tasks.iter().map(|t| (t.position.x, t.position.y)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(agents={}, tasks={}, loiter={}, range={})",
            self.inner.agent_count(),
            self.inner.task_count(),
            self.inner.tasks.iter().filter(|t| t.is_loiter()).count(),
            self.inner.comm_range
        )
    }
}

/// Random scenario on the unit square.
#[pyfunction]
#[pyo3(signature = (agents, tasks, loiter = 0, seed = 0, comm_range = "0.3", horizon = 10.0, steps = 1000))]
fn generate_scenario(
    agents: usize,
    tasks: usize,
    loiter: usize,
    seed: u64,
    comm_range: &str,
    horizon: f64,
    steps: usize,
) -> PyResult<PyScenario> {
    let params = GeneratorParams {
        agents,
        tasks,
        loiter,
        comm_range: parse_range(comm_range).map_err(to_py)?,
        horizon,
        steps,
        ..GeneratorParams::default()
    };
    let inner = generate_random_scenario(&params, seed).map_err(to_py)?;
    Ok(PyScenario { inner })
}

/// Single auction from the initial states.
#[pyfunction]
#[pyo3(signature = (scenario, backend = "closed-form"))]
fn allocate<'py>(py: Python<'py>, scenario: &PyScenario, backend: &str) -> PyResult<Bound<'py, PyDict>> {
    let backend = parse_backend(backend).map_err(to_py)?;
    let (result, costs) = initial_allocation(&scenario.inner, backend).map_err(to_py)?;
    let utility = model::global_utility(&scenario.inner, &result.profile, &costs).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("profile", profile_list(&result.profile))?;
    d.set_item("iterations", result.iterations)?;
    d.set_item("utility", utility)?;
    Ok(d)
}

/// Full receding-horizon run; returns final metrics and the per-step series.
#[pyfunction]
#[pyo3(signature = (scenario, seed = 0, stride = 1, backend = "closed-form"))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    seed: u64,
    stride: usize,
    backend: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SimConfig {
        stride,
        backend: parse_backend(backend).map_err(to_py)?,
        record_bids: false,
        record_trajectory: false,
    };
    let out = py
        .detach(|| Simulator::new(&scenario.inner, config).and_then(|s| s.run(seed)))
        .map_err(to_py)?;
    let records = &out.state.metrics.records;
    let d = PyDict::new(py);
    d.set_item("seed", seed)?;
    d.set_item("final_utility", out.final_utility())?;
    d.set_item("reassignments", out.state.reassignments)?;
    d.set_item("profile", profile_list(&out.state.profile))?;
    d.set_item("time", records.iter().map(|m| m.time).collect::<Vec<_>>())?;
    d.set_item("global_utility", records.iter().map(|m| m.global_utility).collect::<Vec<_>>())?;
    d.set_item("total_cost", records.iter().map(|m| m.total_cost).collect::<Vec<_>>())?;
    d.set_item("expected_reward", records.iter().map(|m| m.expected_reward).collect::<Vec<_>>())?;
    d.set_item(
        "iterations",
        out.state.auctions.iter().map(|a| a.iterations).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Minimum control effort to move between two states in `duration`.
#[pyfunction]
fn cost_to_go(
    start_position: [f64; 2],
    start_velocity: [f64; 2],
    end_position: [f64; 2],
    end_velocity: [f64; 2],
    duration: f64,
) -> PyResult<f64> {
    gcaa_core::cost_to_go(&BoundaryConditions {
        start_position: v2(start_position),
        start_velocity: v2(start_velocity),
        end_position: v2(end_position),
        end_velocity: v2(end_velocity),
        duration,
    })
    .map_err(guard)
}

/// Feedback acceleration at `time` towards the target state at `final_time`.
#[pyfunction]
#[pyo3(signature = (position, velocity, target_position, target_velocity, time, final_time, singular_guard = 1e-9))]
fn control_law(
    position: [f64; 2],
    velocity: [f64; 2],
    target_position: [f64; 2],
    target_velocity: [f64; 2],
    time: f64,
    final_time: f64,
    singular_guard: f64,
) -> PyResult<(f64, f64)> {
    let u = gcaa_core::control_law(
        &ControlLawParams {
            position: v2(position),
            velocity: v2(velocity),
            target_position: v2(target_position),
            target_velocity: v2(target_velocity),
            time,
            final_time,
        },
        singular_guard,
    )
    .map_err(guard)?;
    Ok((u.x, u.y))
}

/// Expected reward of `task` under `profile` (one entry per agent, `None` for unassigned).
#[pyfunction]
fn expected_reward(scenario: &PyScenario, profile: Vec<Option<usize>>, task: usize) -> PyResult<f64> {
    model::expected_reward(&scenario.inner, &profile_from(profile), task).map_err(to_py)
}

#[pymodule]
fn gcaa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(cost_to_go, m)?)?;
    m.add_function(wrap_pyfunction!(control_law, m)?)?;
    m.add_function(wrap_pyfunction!(expected_reward, m)?)?;
    Ok(())
}
