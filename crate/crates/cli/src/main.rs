use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcaa_cli::config::{parse_backend, parse_generate, parse_range, RunDto};
use gcaa_cli::{
    execute_run, execute_sweep, parse_grid, read_file, CliError, Emit, Overrides, RunConfig, Source, SweepConfig,
};
use gcaa_core::{GeneratorParams, SimConfig};

#[derive(Parser)]
#[command(name = "gcaa", version, about = "Greedy coalition auction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario.
    Run(RunArgs),
    /// Average final utility and allocation time over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config with a [scenario] or [generate] table.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    scenario: Option<PathBuf>,
    /// Random scenario, e.g. n=10,p=10,loiter=5.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Communication radius or `unlimited`.
    #[arg(long)]
    range: Option<String>,
    /// Simulation horizon.
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional outputs: metrics, traj, bids, scenario.
    #[arg(long, value_delimiter = ',')]
    emit: Option<Vec<String>>,
    /// Re-auction every this many steps.
    #[arg(long)]
    stride: Option<usize>,
    /// closed-form, numeric or numeric:<steps>.
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = ["range", "loiter-ratio", "agents-tasks"])]
    axis: String,
    #[arg(long)]
    grid: String,
    /// Number of seeds per grid point (seeds 0..count).
    #[arg(long)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    /// Base scenario, e.g. n=10,p=10,loiter=5.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    backend: Option<String>,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = match (&args.scenario, &args.generate) {
        (Some(path), _) => RunConfig::from_toml(&read_file(path)?)?,
        (None, Some(spec)) => RunConfig::with_source(Source::Generate(parse_generate(spec)?), RunDto::default())?,
        (None, None) => return Err(CliError::parse("one of --scenario or --generate is required")),
    };
    cfg.apply(Overrides {
        seed: args.seed,
        range: args.range.as_deref().map(parse_range).transpose()?,
        horizon: args.tf,
        steps: args.steps,
        out_dir: args.out,
        emit: args.emit.as_deref().map(Emit::parse).transpose()?,
        stride: args.stride,
        backend: args.backend.as_deref().map(parse_backend).transpose()?,
    })?;
    let scenario = cfg.scenario()?;
    let summary = execute_run(&cfg, &scenario)?;
    println!(
        "seed {} utility {:.6} reassignments {} -> {}",
        cfg.seed,
        summary.final_utility,
        summary.reassignments,
        summary.out_dir.display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut base = match &args.generate {
        Some(spec) => parse_generate(spec)?,
        None => GeneratorParams::default(),
    };
    if let Some(r) = &args.range {
        base.comm_range = parse_range(r)?;
    }
    if let Some(t) = args.tf {
        base.horizon = t;
    }
    if let Some(k) = args.steps {
        base.steps = k;
    }
    let stride = args.stride.unwrap_or(1);
    if stride == 0 {
        return Err(CliError::validation("stride", "must be >= 1"));
    }
    let cfg = SweepConfig {
        axis: parse_grid(&args.axis, &args.grid)?,
        base,
        seeds: (0..args.seeds).collect(),
        out_dir: args.out,
        sim: SimConfig {
            stride,
            backend: match &args.backend {
                Some(b) => parse_backend(b)?,
                None => SimConfig::default().backend,
            },
            ..SimConfig::default()
        },
    };
    let files = execute_sweep(&cfg)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
