mod commands;

use asvnav::ControllerKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Multi-vessel navigation lab: train, evaluate and inspect controllers.
#[derive(Debug, Parser)]
#[command(name = "asvnav", version)]
struct Cli {
    /// TOML file layered over the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a single config key, e.g. `--set agent.lr_critic=3e-4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Root directory for run artifacts.
    #[arg(long, global = true, env = "ASVNAV_OUT", default_value = "runs", value_name = "DIR")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curriculum training of a learning agent.
    Train(TrainArgs),
    /// Run the evaluation sets with one shared controller.
    Eval(EvalArgs),
    /// Run a single episode and export its trajectory.
    Rollout(RolloutArgs),
    /// Segment a range scan into clusters.
    Segment(SegmentArgs),
    /// Render learning curves and trajectories to SVG.
    PlotExport(PlotArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_agent)]
    agent: ControllerKind,
    /// Environment steps; defaults to the full curriculum.
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_parser = parse_agent)]
    agent: ControllerKind,
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Episodes per set, overriding the configured count.
    #[arg(long)]
    episodes: Option<usize>,
    /// Restrict to sets with these labels.
    #[arg(long = "only", value_name = "LABEL")]
    only: Vec<String>,
    /// Also write every episode's trajectory.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Debug, Args)]
struct RolloutArgs {
    #[arg(long, value_parser = parse_agent)]
    agent: ControllerKind,
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Curriculum stage (1-based) the scenario is drawn from.
    #[arg(long, default_value_t = 1)]
    stage: usize,
    /// Draw a velocity arrow every this many samples.
    #[arg(long, default_value_t = 10)]
    marker_every: usize,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// JSON scan; without it a scan is simulated from a stage-1 scenario.
    #[arg(long, value_name = "PATH")]
    scan: Option<PathBuf>,
    /// Segmentation threshold in radians.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Learning-curve file; repeat a label to add seeds to one family.
    #[arg(long = "curve", value_name = "LABEL=PATH")]
    curves: Vec<String>,
    #[arg(long, value_name = "PATH", requires = "scenario")]
    trajectory: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "trajectory")]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    marker_every: usize,
}

fn parse_agent(s: &str) -> Result<ControllerKind, asvnav::Error> {
    s.parse()
}

/// Failure attributable to how the program was invoked.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<asvnav::Error>() {
        Some(asvnav::Error::Divergence(_)) => 3,
        Some(asvnav::Error::OutOfScope(_) | asvnav::Error::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
