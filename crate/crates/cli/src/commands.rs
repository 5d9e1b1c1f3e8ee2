use crate::{Cli, Command, EvalArgs, PlotArgs, RolloutArgs, SegmentArgs, TrainArgs, UsageError};
use anyhow::{Context, Result};
use asvnav::agents::{train, CurveRow, TrainOptions};
use asvnav::episode::EpisodeSettings;
use asvnav::harness::{
    curve_svg, read_curve_tsv, read_trajectory_ndjson, run_set, summary_table, trajectory_svg, write_curve_tsv,
    write_metrics_tsv, write_trajectory_ndjson, CurveFamily, Manifest,
};
use asvnav::perception::{segment, simulate_scan, Scan};
use asvnav::world::generate_scenario;
use asvnav::{run_episode, Agent, Controller, ControllerKind, ExperimentSet, LabConfig, Scenario, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

const DEFAULT_SEED: u64 = 0;

type Panel = (&'static str, fn(&CurveRow) -> f64, &'static str);

struct Run {
    cfg: LabConfig,
    seed: Option<u64>,
    out: PathBuf,
}

impl Run {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.out.join(name);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn manifest(&self, dir: &Path, command: &str, controller: Option<ControllerKind>) -> Result<()> {
        Manifest::new(command, controller.map(|c| c.name()), self.seed(), &self.cfg).write(dir)?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = LabConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let run = Run { cfg, seed: cli.seed, out: cli.out };
    match cli.command {
        Command::Train(args) => train_cmd(&run, args),
        Command::Eval(args) => eval_cmd(&run, args),
        Command::Rollout(args) => rollout_cmd(&run, args),
        Command::Segment(args) => segment_cmd(&run, args),
        Command::PlotExport(args) => plot_cmd(&run, args),
    }
}

fn controller(kind: ControllerKind, checkpoint: Option<&Path>, cfg: &LabConfig) -> Result<Controller> {
    match (kind.agent_kind(), checkpoint) {
        (Some(expected), Some(path)) => {
            let agent = Agent::load(path).with_context(|| format!("loading {}", path.display()))?;
            if agent.kind != expected {
                return Err(UsageError(format!(
                    "checkpoint {} holds a {} agent, not {}",
                    path.display(),
                    agent.kind.name(),
                    expected.name()
                ))
                .into());
            }
            Ok(Controller::Agent(Box::new(agent)))
        }
        (Some(_), None) => Err(UsageError(format!("--agent {} requires --checkpoint", kind.name())).into()),
        (None, Some(_)) => Err(UsageError(format!("--agent {} takes no checkpoint", kind.name())).into()),
        (None, None) => Ok(Controller::baseline(kind, cfg)?),
    }
}

fn train_cmd(run: &Run, args: TrainArgs) -> Result<()> {
    let kind =
        args.agent.agent_kind().ok_or_else(|| UsageError(format!("{} is not a learning agent", args.agent.name())))?;
    let dir = run.dir(&format!("train-{}-seed{}", kind.name(), run.seed()))?;
    run.manifest(&dir, "train", Some(args.agent))?;
    let mut agent = Agent::from_config(kind, &run.cfg, run.seed())?;
    let report =
        train(&mut agent, &run.cfg, run.seed(), &TrainOptions { total_steps: args.steps, out_dir: Some(&dir) })?;
    write_curve_tsv(&dir.join("curve.tsv"), &report.curve)?;
    agent.save(&dir.join("final.ckpt"))?;
    println!(
        "trained {} for {} steps ({} episodes, {} updates) -> {}",
        kind.name(),
        report.steps,
        report.episodes,
        report.updates,
        dir.display()
    );
    if let Some(last) = report.curve.last() {
        println!("last evaluation: success {:.0}%, reward {:.2}", 100.0 * last.success_rate, last.reward_mean);
    }
    Ok(())
}

fn eval_cmd(run: &Run, args: EvalArgs) -> Result<()> {
    let mut cfg = run.cfg.clone();
    if let Some(seed) = run.seed {
        cfg.harness.seed_base = seed;
    }
    let controller = controller(args.agent, args.checkpoint.as_deref(), &cfg)?;
    let mut sets = ExperimentSet::all(&cfg);
    if !args.only.is_empty() {
        sets.retain(|s| args.only.contains(&s.label));
        if sets.is_empty() {
            return Err(UsageError(format!("no set matches {:?}", args.only)).into());
        }
    }
    if let Some(n) = args.episodes {
        sets.iter_mut().for_each(|s| s.episodes = n);
    }
    let dir = run.dir(&format!("eval-{}-seed{}", args.agent.name(), cfg.harness.seed_base))?;
    Manifest::new("eval", Some(args.agent.name()), cfg.harness.seed_base, &cfg).write(&dir)?;
    let mut summaries = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        let outcome = run_set(set, &controller, &cfg, args.trajectories)?;
        log::info!("{}: {:.0}% success", set.label, 100.0 * outcome.summary.success_rate);
        if args.trajectories {
            for (i, ep) in outcome.episodes.iter().enumerate() {
                write_trajectory_ndjson(&dir.join(format!("set{}_episode{i:03}.ndjson", k + 1)), &ep.trajectory)?;
            }
        }
        summaries.push(outcome.summary);
    }
    write_metrics_tsv(&dir.join("metrics.tsv"), &summaries)?;
    let table = summary_table(&[summaries]);
    std::fs::write(dir.join("summary.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

fn rollout_cmd(run: &Run, args: RolloutArgs) -> Result<()> {
    let cfg = &run.cfg;
    let stage = args
        .stage
        .checked_sub(1)
        .and_then(|i| cfg.curriculum.get(i))
        .ok_or_else(|| UsageError(format!("stage {} not in 1..={}", args.stage, cfg.curriculum.len())))?;
    let controller = controller(args.agent, args.checkpoint.as_deref(), cfg)?;
    controller.check_compatible(cfg)?;
    let seed = run.seed();
    let scenario = generate_scenario(stage, &cfg.scenario, cfg.vessel.hull_radius, seed)?;
    let settings = EpisodeSettings {
        world: cfg.world_config(),
        perception: cfg.perception.clone(),
        reward: cfg.reward.clone(),
        record_trajectory: true,
    };
    let mut policy = controller.policy(seed);
    let result = run_episode(&scenario, &settings, policy.as_mut(), seed)?;

    let dir = run.dir(&format!("rollout-{}-stage{}-seed{seed}", args.agent.name(), args.stage))?;
    run.manifest(&dir, "rollout", Some(args.agent))?;
    std::fs::write(dir.join("scenario.json"), scenario.to_json()?)?;
    write_trajectory_ndjson(&dir.join("trajectory.ndjson"), &result.trajectory)?;
    std::fs::write(dir.join("trajectory.svg"), trajectory_svg(&scenario, &result.trajectory, args.marker_every)?)?;

    println!("{} after {} steps", if result.success { "success" } else { "failure" }, result.steps);
    for (i, t) in result.travel_times.iter().enumerate() {
        match t {
            Some(t) => println!("vehicle {i}: reached goal at {t:.2} s"),
            None => println!("vehicle {i}: did not arrive"),
        }
    }
    for e in &result.events {
        println!("t = {:.2} s: vehicle {} {:?}", e.time, e.vehicle, e.kind);
    }
    Ok(())
}

fn segment_cmd(run: &Run, args: SegmentArgs) -> Result<()> {
    let cfg = &run.cfg;
    let scan: Scan = match &args.scan {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let stage = cfg.curriculum.first().ok_or_else(|| UsageError("empty curriculum".into()))?;
            let scenario = generate_scenario(stage, &cfg.scenario, cfg.vessel.hull_radius, run.seed())?;
            let world = World::new(&scenario, cfg.world_config(), run.seed());
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
            let p = &cfg.perception;
            simulate_scan(&world, 0, p.beams, p.max_range, p.range_noise_std, &mut rng)
        }
    };
    let theta = args.threshold.unwrap_or(cfg.perception.segmentation_threshold);
    if theta.is_nan() || theta <= 0.0 {
        return Err(UsageError(format!("segmentation threshold must be positive, got {theta}")).into());
    }
    let clusters = segment(&scan, theta);

    let dir = run.dir(&format!("segment-seed{}", run.seed()))?;
    run.manifest(&dir, "segment", None)?;
    std::fs::write(dir.join("scan.json"), serde_json::to_string(&scan)?)?;
    std::fs::write(dir.join("clusters.json"), serde_json::to_string_pretty(&clusters)?)?;
    println!("{} clusters", clusters.len());
    for (i, c) in clusters.iter().enumerate() {
        println!(
            "{i}: {} returns, centroid ({:.2}, {:.2}), radius {:.2}",
            c.members.len(),
            c.centroid.x,
            c.centroid.y,
            c.radius
        );
    }
    Ok(())
}

fn plot_cmd(run: &Run, args: PlotArgs) -> Result<()> {
    if args.curves.is_empty() && args.trajectory.is_none() {
        return Err(UsageError("nothing to plot: pass --curve and/or --trajectory with --scenario".into()).into());
    }
    let dir = run.dir("plots")?;
    run.manifest(&dir, "plot-export", None)?;

    if !args.curves.is_empty() {
        let mut families: Vec<CurveFamily> = Vec::new();
        for spec in &args.curves {
            let (label, path) =
                spec.split_once('=').ok_or_else(|| UsageError(format!("expected LABEL=PATH, got `{spec}`")))?;
            let rows = read_curve_tsv(Path::new(path))?;
            match families.iter_mut().find(|f| f.label == label) {
                Some(f) => f.runs.push(rows),
                None => families.push(CurveFamily { label: label.to_string(), runs: vec![rows] }),
            }
        }
        let panels: [Panel; 2] = [
            ("curve_success.svg", |r| r.success_rate, "success rate"),
            ("curve_reward.svg", |r| r.reward_mean, "cumulative reward"),
        ];
        for (file, metric, label) in panels {
            std::fs::write(dir.join(file), curve_svg(&families, metric, label)?)?;
            println!("wrote {}", dir.join(file).display());
        }
    }
    if let (Some(traj), Some(scen)) = (&args.trajectory, &args.scenario) {
        let records = read_trajectory_ndjson(traj)?;
        let text = std::fs::read_to_string(scen).with_context(|| format!("reading {}", scen.display()))?;
        let scenario: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", scen.display()))?;
        let path = dir.join("trajectory.svg");
        std::fs::write(&path, trajectory_svg(&scenario, &records, args.marker_every)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
