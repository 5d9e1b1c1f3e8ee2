use super::{Agent, GreedyPolicy, ReplayBuffer, Transition};
use crate::config::LabConfig;
use crate::episode::{run_episode, EpisodeSettings};
use crate::error::{Error, Result};
use crate::perception::Perception;
use crate::world::{generate_scenario, CurriculumStage, EventKind, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Environment steps between evaluations.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Environment steps between checkpoints (0 disables).
    pub checkpoint_every: u64,
}

/// One learning-curve sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub stage: usize,
    pub reward_mean: f64,
    pub reward_stderr: f64,
    pub success_rate: f64,
    /// Mean arrival time over vehicles that reached their goal.
    pub avg_travel_time: Option<f64>,
}

impl CurveRow {
    pub const TSV_HEADER: &'static str = "step\tstage\treward_mean\treward_stderr\tsuccess_rate\tavg_travel_time";

    pub fn to_tsv(&self) -> String {
        let time = self.avg_travel_time.map_or_else(|| "nan".to_string(), |t| format!("{t:.6}"));
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            self.step, self.stage, self.reward_mean, self.reward_stderr, self.success_rate, time
        )
    }

    pub fn from_tsv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::Config(format!("curve row needs 6 fields: `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{s}` in curve row")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::Config(format!("bad integer `{s}` in curve row")));
        let t = num(f[5])?;
        Ok(Self {
            step: int(f[0])?,
            stage: int(f[1])? as usize,
            reward_mean: num(f[2])?,
            reward_stderr: num(f[3])?,
            success_rate: num(f[4])?,
            avg_travel_time: t.is_finite().then_some(t),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    /// Overrides the summed curriculum durations.
    pub total_steps: Option<u64>,
    /// Directory for periodic and diagnostic checkpoints.
    pub out_dir: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
}

/// Curriculum stage active at environment step `step`.
pub fn stage_at(curriculum: &[CurriculumStage], step: u64) -> &CurriculumStage {
    let mut end = 0;
    for stage in curriculum {
        end += stage.duration;
        if step < end {
            return stage;
        }
    }
    curriculum.last().expect("non-empty curriculum")
}

fn eval_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x0e7a_1000_0000 + episode as u64)
}

/// Greedy evaluation on `episodes` fixed scenarios of `stage`.
pub fn evaluate(
    agent: &Agent,
    cfg: &LabConfig,
    stage: &CurriculumStage,
    seed: u64,
    episodes: usize,
    step: u64,
) -> Result<CurveRow> {
    let settings = EpisodeSettings {
        world: cfg.world_config(),
        perception: cfg.perception.clone(),
        reward: cfg.reward.clone(),
        record_trajectory: false,
    };
    let mut returns = Vec::with_capacity(episodes);
    let mut successes = 0;
    let mut times = Vec::new();
    for e in 0..episodes {
        let s = eval_seed(seed, e);
        let scenario = generate_scenario(stage, &cfg.scenario, cfg.vessel.hull_radius, s)?;
        let result = run_episode(&scenario, &settings, &mut GreedyPolicy(agent), s)?;
        returns.push(result.mean_return());
        successes += result.success as usize;
        times.extend(result.travel_times.iter().flatten());
    }
    let n = returns.len().max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if returns.len() > 1 { returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(CurveRow {
        step,
        stage: stage.index,
        reward_mean: mean,
        reward_stderr: (var / n).sqrt(),
        success_rate: successes as f64 / n,
        avg_travel_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
    })
}

/// Curriculum training of one shared model driving every vehicle.
pub fn train(agent: &mut Agent, cfg: &LabConfig, seed: u64, opts: &TrainOptions) -> Result<TrainReport> {
    let total = opts.total_steps.unwrap_or_else(|| cfg.curriculum.iter().map(|s| s.duration).sum());
    if cfg.curriculum.is_empty() {
        return Err(Error::Config("empty curriculum".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buffer = ReplayBuffer::new(agent.config.buffer_capacity);
    let world_cfg = cfg.world_config();
    let min_fill = agent.config.warmup_steps.max(agent.config.batch_size);
    let mut curve = Vec::new();
    let mut step = 0u64;
    let mut episodes = 0u64;

    while step < total {
        let stage = stage_at(&cfg.curriculum, step).clone();
        let scenario = generate_scenario(&stage, &cfg.scenario, cfg.vessel.hull_radius, rng.random())?;
        let mut world = World::new(&scenario, world_cfg.clone(), rng.random());
        let n = world.vehicles.len();
        let mut perception = Perception::new(cfg.perception.clone(), n, rng.random());
        let mut obs: Vec<_> = (0..n).map(|i| perception.observe(&world, i)).collect();
        episodes += 1;

        while !world.is_done() && step < total {
            agent.env_steps = step;
            let active: Vec<usize> = world.active_ids().collect();
            let mut chosen = vec![None; n];
            let mut deltas = vec![None; n];
            for &i in &active {
                let a = agent.select_action(&obs[i], true)?;
                deltas[i] = Some(a.delta());
                chosen[i] = Some(a);
            }
            let events = world.step(&deltas)?;
            for &i in &active {
                let next = perception.observe(&world, i);
                let kind = events.iter().find(|e| e.vehicle == i).map(|e| e.kind);
                let r = crate::colregs::reward(&obs[i], &next, kind, &cfg.reward).total;
                let done = matches!(kind, Some(EventKind::Collision | EventKind::GoalReached));
                let action = chosen[i].expect("active vehicle acted");
                buffer.push(Transition { state: obs[i].clone(), action, reward: r, next_state: next.clone(), done });
                obs[i] = next;
            }
            step += 1;

            if buffer.len() >= min_fill && step.is_multiple_of(agent.config.train_every) {
                let batch = agent.sample_batch(&buffer);
                if let Err(e) = agent.update(&batch) {
                    if let (Error::Divergence(_), Some(dir)) = (&e, opts.out_dir) {
                        let path = dir.join("diagnostic.ckpt");
                        agent.save(&path)?;
                        log::error!("training diverged at step {step}; wrote {}", path.display());
                    }
                    return Err(e);
                }
            }
            if cfg.training.eval_interval > 0 && step.is_multiple_of(cfg.training.eval_interval) {
                let row = evaluate(agent, cfg, &stage, seed, cfg.training.eval_episodes, step)?;
                log::info!(
                    "step {step} stage {} success {:.2} reward {:.2}",
                    row.stage,
                    row.success_rate,
                    row.reward_mean
                );
                curve.push(row);
            }
            if let (true, Some(dir)) = (cfg.training.checkpoint_every > 0, opts.out_dir) {
                if step.is_multiple_of(cfg.training.checkpoint_every) {
                    agent.save(&dir.join(format!("checkpoint_{step}.ckpt")))?;
                }
            }
        }
    }
    agent.env_steps = step;
    Ok(TrainReport { curve, steps: step, episodes, updates: agent.updates })
}
