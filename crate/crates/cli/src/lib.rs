//! Command-line front end for the GCAA simulator: config loading, run and
//! sweep execution, and on-disk outputs.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use gcaa_core::auction::AuctionError;
use gcaa_core::{sweep, CommRange, GeneratorParams, ModelError, Scenario, SimConfig, SimError, Simulator, SweepAxis};
use thiserror::Error;

pub use config::{parse_config, Emit, Overrides, RunConfig, Source};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("numerical guard tripped: {0}")]
    Guard(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("simulation failed: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError::Parse {
            line: None,
            message: message.into(),
        }
    }

    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn from_toml(text: &str, err: &toml::de::Error) -> Self {
        let line = err
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Parse {
            line,
            message: err.message().to_string(),
        }
    }

    /// Process exit status for this error category.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::Guard(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Simulation(_) => 6,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid { field, reason } => CliError::Validation { field, reason },
            other => CliError::Simulation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(reason) => CliError::validation("config", reason),
            SimError::Model(m) => m.into(),
            SimError::Control(c) => CliError::Guard(c.to_string()),
            SimError::Auction(AuctionError::NegativeRange(r)) => {
                CliError::validation("comm_range", format!("must be non-negative, got {r}"))
            }
            SimError::Auction(a) => CliError::Guard(a.to_string()),
            other => CliError::Simulation(other.to_string()),
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub final_utility: f64,
    pub reassignments: usize,
}

/// Simulates `scenario` under `cfg` and writes the outputs to `cfg.out_dir`.
pub fn execute_run(cfg: &RunConfig, scenario: &Scenario) -> Result<RunSummary, CliError> {
    let sim_config = SimConfig {
        stride: cfg.stride,
        backend: cfg.backend,
        record_bids: cfg.emit.bids,
        record_trajectory: cfg.emit.trajectories,
    };
    let started = Instant::now();
    let out = Simulator::new(scenario, sim_config)?.run(cfg.seed)?;
    let wall = started.elapsed().as_secs_f64();
    let files = output::write_run(cfg, scenario, &out, wall)?;
    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        files,
        final_utility: out.final_utility(),
        reassignments: out.state.reassignments,
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub base: GeneratorParams,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub sim: SimConfig,
}

pub fn execute_sweep(cfg: &SweepConfig) -> Result<Vec<PathBuf>, CliError> {
    if cfg.seeds.is_empty() {
        return Err(CliError::validation("seeds", "must be >= 1"));
    }
    let started = Instant::now();
    let rows = sweep(&cfg.axis, &cfg.base, &cfg.sim, &cfg.seeds)?;
    let wall = started.elapsed().as_secs_f64();
    output::write_sweep(cfg, &rows, wall)
}

/// Parses a sweep grid for `axis`.
///
/// * `range`: comma-separated radii, `unlimited` allowed.
/// * `loiter-ratio`: comma-separated fractions in [0, 1].
/// * `agents-tasks`: `NxP` pairs (`4x4,8x8`) or a cartesian product
///   of two lists (`2,4x3,6`).
pub fn parse_grid(axis: &str, grid: &str) -> Result<SweepAxis, CliError> {
    let items = || grid.split(',').map(str::trim).filter(|s| !s.is_empty());
    let axis = match axis {
        "range" => SweepAxis::CommRange(items().map(config::parse_range).collect::<Result<Vec<CommRange>, _>>()?),
        "loiter-ratio" => SweepAxis::LoiterRatio(
            items()
                .map(|s| {
                    let f: f64 = s
                        .parse()
                        .map_err(|_| CliError::parse(format!("grid: '{s}' is not a number")))?;
                    if !(0.0..=1.0).contains(&f) {
                        return Err(CliError::validation("grid", format!("loiter ratio {f} outside [0, 1]")));
                    }
                    Ok(f)
                })
                .collect::<Result<_, _>>()?,
        ),
        "agents-tasks" => SweepAxis::AgentsByTasks(parse_pairs(grid)?),
        other => {
            return Err(CliError::parse(format!(
                "axis: expected range, loiter-ratio or agents-tasks, got '{other}'"
            )))
        }
    };
    let empty = match &axis {
        SweepAxis::CommRange(v) => v.is_empty(),
        SweepAxis::LoiterRatio(v) => v.is_empty(),
        SweepAxis::AgentsByTasks(v) => v.is_empty(),
    };
    if empty {
        return Err(CliError::validation("grid", "empty"));
    }
    Ok(axis)
}

fn parse_count(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::parse(format!("grid: '{}' is not a count", s.trim())))
}

fn parse_pairs(grid: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let pieces: Vec<&str> = grid.split('x').collect();
    if pieces.len() == 2 && (pieces[0].contains(',') || pieces[1].contains(',')) {
        let ns = pieces[0].split(',').map(parse_count).collect::<Result<Vec<_>, _>>()?;
        let ps = pieces[1].split(',').map(parse_count).collect::<Result<Vec<_>, _>>()?;
        return Ok(ns.iter().flat_map(|&n| ps.iter().map(move |&p| (n, p))).collect());
    }
    grid.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (n, p) = pair
                .split_once('x')
                .ok_or_else(|| CliError::parse(format!("grid: expected NxP, got '{pair}'")))?;
            Ok((parse_count(n)?, parse_count(p)?))
        })
        .collect()
}
