//! Output files. Every JSON document starts with `schema_version` and every
//! CSV table has it as the first column.
//!
//! Wall-clock timings go to `manifest.json` only, so `report.json` and the
//! CSV tables are byte-identical across runs with the same inputs.

use std::fs;
use std::path::{Path, PathBuf};

use gcaa_core::model::{expected_reward, AgentStatus, Assignment, Scenario};
use gcaa_core::simulator::RunOutput;
use gcaa_core::{CommRange, CostBackend, SweepRow};
use serde_json::{json, Value};

use crate::config::{scenario_to_toml, RunConfig, Source};
use crate::{CliError, SweepConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const METRICS: &str = "metrics.csv";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const BIDS: &str = "bids.csv";
pub const SCENARIO: &str = "scenario.toml";
pub const SWEEP: &str = "sweep.csv";

/// Writes via a temporary sibling and a rename so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Simulation(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        fill(w)?;
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| CliError::Simulation(format!("csv: {e}")))?;
    w.into_inner().map_err(|e| CliError::Simulation(format!("csv: {e}")))
}

fn range_value(r: CommRange) -> Value {
    match r {
        CommRange::Limited(v) => json!(v),
        CommRange::Unlimited => json!("unlimited"),
    }
}

fn backend_value(b: CostBackend) -> Value {
    match b {
        CostBackend::ClosedForm => json!("closed-form"),
        CostBackend::Numeric { steps } => json!(format!("numeric:{steps}")),
    }
}

fn assignment_value(a: Assignment) -> Value {
    match a {
        Assignment::Task(j) => json!(j),
        Assignment::Null => Value::Null,
    }
}

fn assignment_cell(a: Assignment) -> String {
    a.task().map(|j| j.to_string()).unwrap_or_default()
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_run(cfg: &RunConfig, scenario: &Scenario, out: &RunOutput, wall_time: f64) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let v = SCHEMA_VERSION.to_string();
    let state = &out.state;
    let mut files = Vec::new();

    if cfg.emit.metrics {
        let bytes = csv_bytes(
            &["schema_version", "time", "total_cost", "expected_reward", "cost_to_go", "global_utility"],
            |w| {
                for m in &state.metrics.records {
                    w.write_record([
                        v.clone(),
                        f(m.time),
                        f(m.total_cost),
                        f(m.expected_reward),
                        f(m.cost_to_go),
                        f(m.global_utility),
                    ])?;
                }
                Ok(())
            },
        )?;
        files.push(emit(dir, METRICS, &bytes)?);
    }
    if cfg.emit.trajectories {
        let bytes = csv_bytes(
            &["schema_version", "step", "time", "agent", "x", "y", "vx", "vy", "passive", "task"],
            |w| {
                for r in &state.trajectory {
                    w.write_record([
                        v.clone(),
                        r.step.to_string(),
                        f(r.time),
                        r.agent.to_string(),
                        f(r.position.x),
                        f(r.position.y),
                        f(r.velocity.x),
                        f(r.velocity.y),
                        matches!(r.status, AgentStatus::Passive(_)).to_string(),
                        assignment_cell(r.assignment),
                    ])?;
                }
                Ok(())
            },
        )?;
        files.push(emit(dir, TRAJECTORIES, &bytes)?);
    }
    if cfg.emit.bids {
        let bytes = csv_bytes(
            &["schema_version", "step", "time", "iteration", "viewer", "agent", "task", "bid", "finalized"],
            |w| {
                for a in &state.auctions {
                    for (k, views) in a.trace.iter().flatten().enumerate() {
                        for (viewer, view) in views.iter().enumerate() {
                            for agent in 0..view.selected.len() {
                                w.write_record([
                                    v.clone(),
                                    a.step.to_string(),
                                    f(a.time),
                                    (k + 1).to_string(),
                                    viewer.to_string(),
                                    agent.to_string(),
                                    assignment_cell(view.selected[agent]),
                                    f(view.bids[agent]),
                                    view.finalized[agent].to_string(),
                                ])?;
                            }
                        }
                    }
                }
                Ok(())
            },
        )?;
        files.push(emit(dir, BIDS, &bytes)?);
    }
    if cfg.emit.scenario {
        files.push(emit(dir, SCENARIO, scenario_to_toml(scenario)?.as_bytes())?);
    }

    let report = report(cfg, scenario, out)?;
    let report_path = dir.join(REPORT);
    write_json(&report_path, &report)?;
    files.push(report_path);

    let manifest_path = dir.join(MANIFEST);
    let mut names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push(MANIFEST.into());
    let generator = match &cfg.source {
        Source::Generate(p) => json!({
            "agents": p.agents,
            "tasks": p.tasks,
            "loiter": p.loiter,
            "comm_range": range_value(p.comm_range),
            "horizon": p.horizon,
            "steps": p.steps,
            "drag": p.drag,
            "lambda": p.lambda,
        }),
        Source::Explicit(_) => Value::Null,
    };
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "gcaa",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "run",
        "seed": cfg.seed,
        "source": match cfg.source { Source::Generate(_) => "generate", Source::Explicit(_) => "scenario" },
        "generator": generator,
        "scenario": {
            "agents": scenario.agent_count(),
            "tasks": scenario.task_count(),
            "loiter_tasks": scenario.tasks.iter().filter(|t| t.is_loiter()).count(),
            "comm_range": range_value(scenario.comm_range),
            "horizon": scenario.horizon,
            "steps": scenario.steps,
            "drag": scenario.drag,
        },
        "run": {
            "stride": cfg.stride,
            "backend": backend_value(cfg.backend),
            "emit": cfg.emit.names(),
        },
        "timing": {
            "wall_time_s": wall_time,
            "allocation_time_s": state.allocation_time.as_secs_f64(),
        },
        "files": names,
    });
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    Ok(files)
}

fn emit(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

fn report(cfg: &RunConfig, scenario: &Scenario, out: &RunOutput) -> Result<Value, CliError> {
    let state = &out.state;
    let last = state.metrics.last().copied();
    let coalitions = (0..scenario.task_count())
        .map(|j| {
            Ok(json!({
                "task": j,
                "agents": state.profile.members(j).collect::<Vec<_>>(),
                "expected_reward": expected_reward(scenario, &state.profile, j)?,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let passive: Vec<usize> = state.agents.iter().filter(|a| a.is_passive()).map(|a| a.id).collect();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "final_time": state.time,
        "steps": state.step,
        "global_utility": last.map_or(0.0, |m| m.global_utility),
        "expected_reward": last.map_or(0.0, |m| m.expected_reward),
        "total_cost": last.map_or(0.0, |m| m.total_cost),
        "cost_to_go": last.map_or(0.0, |m| m.cost_to_go),
        "reassignments": state.reassignments,
        "auctions": state.auctions.len(),
        "auction_iterations": state.auctions.iter().map(|a| a.iterations).collect::<Vec<_>>(),
        "profile": state.profile.assignments.iter().map(|&a| assignment_value(a)).collect::<Vec<_>>(),
        "passive_agents": passive,
        "coalitions": coalitions,
    }))
}

pub fn write_sweep(cfg: &SweepConfig, rows: &[SweepRow], wall_time: f64) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let v = SCHEMA_VERSION.to_string();
    let bytes = csv_bytes(
        &[
            "schema_version",
            "axis",
            "setting",
            "agents",
            "tasks",
            "loiter",
            "comm_range",
            "runs",
            "mean_utility",
            "std_utility",
            "mean_iterations",
            "mean_wall_time_s",
        ],
        |w| {
            for r in rows {
                w.write_record([
                    v.clone(),
                    cfg.axis.name().to_string(),
                    r.setting.clone(),
                    r.agents.to_string(),
                    r.tasks.to_string(),
                    r.loiter.to_string(),
                    r.comm_range.to_string(),
                    r.runs.to_string(),
                    f(r.mean_utility),
                    f(r.std_utility),
                    f(r.mean_iterations),
                    f(r.mean_wall_time),
                ])?;
            }
            Ok(())
        },
    )?;
    let sweep_path = emit(dir, SWEEP, &bytes)?;
    let manifest_path = dir.join(MANIFEST);
    let b = &cfg.base;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "gcaa",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "axis": cfg.axis.name(),
        "seeds": cfg.seeds,
        "base": {
            "agents": b.agents,
            "tasks": b.tasks,
            "loiter": b.loiter,
            "comm_range": range_value(b.comm_range),
            "horizon": b.horizon,
            "steps": b.steps,
        },
        "run": {
            "stride": cfg.sim.stride,
            "backend": backend_value(cfg.sim.backend),
        },
        "timing": { "wall_time_s": wall_time },
        "files": [SWEEP, MANIFEST],
    });
    write_json(&manifest_path, &manifest)?;
    Ok(vec![sweep_path, manifest_path])
}
