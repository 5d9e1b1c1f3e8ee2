//! Experiment protocol: fixed evaluation sets, one shared controller per
//! set, seeded episodes, aggregate metrics and exported artifacts.

mod io;
mod plot;

pub use io::{
    read_curve_tsv, read_trajectory_ndjson, write_curve_tsv, write_metrics_tsv, write_trajectory_ndjson, Manifest,
};
pub use plot::{curve_svg, trajectory_svg, CurveFamily};

use crate::agents::{Agent, AgentKind, GreedyPolicy, RandomPolicy};
use crate::baselines::{ApfController, MpcController};
use crate::config::LabConfig;
use crate::episode::{run_episode, EpisodeResult, EpisodeSettings, Policy};
use crate::error::{Error, Result};
use crate::world::{generate_scenario, CurriculumStage, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub label: String,
    pub num_robots: usize,
    pub num_buoys: usize,
    pub min_start_goal_distance: f64,
    pub world_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub episodes_per_set: usize,
    pub seed_base: u64,
    /// Run episodes of a set concurrently. Off = reproducibility mode.
    pub parallel: bool,
    pub sets: Vec<SetSpec>,
}

/// Controllers the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    AcIqn,
    Iqn,
    Dqn,
    Ddpg,
    Apf,
    Mpc,
    Random,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::AcIqn => "ac-iqn",
            ControllerKind::Iqn => "iqn",
            ControllerKind::Dqn => "dqn",
            ControllerKind::Ddpg => "ddpg",
            ControllerKind::Apf => "apf",
            ControllerKind::Mpc => "mpc",
            ControllerKind::Random => "random",
        }
    }

    pub fn agent_kind(&self) -> Option<AgentKind> {
        match self {
            ControllerKind::AcIqn => Some(AgentKind::AcIqn),
            ControllerKind::Iqn => Some(AgentKind::Iqn),
            ControllerKind::Dqn => Some(AgentKind::Dqn),
            ControllerKind::Ddpg => Some(AgentKind::Ddpg),
            _ => None,
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apf" => Ok(ControllerKind::Apf),
            "mpc" => Ok(ControllerKind::Mpc),
            "random" => Ok(ControllerKind::Random),
            other => Ok(match other.parse::<AgentKind>()? {
                AgentKind::AcIqn => ControllerKind::AcIqn,
                AgentKind::Iqn => ControllerKind::Iqn,
                AgentKind::Dqn => ControllerKind::Dqn,
                AgentKind::Ddpg => ControllerKind::Ddpg,
            }),
        }
    }
}

/// A configured controller shared by every vehicle of every episode.
#[derive(Debug, Clone)]
pub enum Controller {
    Agent(Box<Agent>),
    Apf(ApfController),
    Mpc(MpcController),
    Random,
}

impl Controller {
    /// Baseline or random controller from the lab config.
    pub fn baseline(kind: ControllerKind, cfg: &LabConfig) -> Result<Self> {
        Ok(match kind {
            ControllerKind::Apf => {
                cfg.apf.validate()?;
                Controller::Apf(ApfController {
                    config: cfg.apf.clone(),
                    reward: cfg.reward.clone(),
                    vessel: cfg.vessel.clone(),
                    timing: cfg.timing,
                })
            }
            ControllerKind::Mpc => {
                cfg.mpc.validate()?;
                Controller::Mpc(MpcController {
                    config: cfg.mpc.clone(),
                    reward: cfg.reward.clone(),
                    vessel: cfg.vessel.clone(),
                    timing: cfg.timing,
                })
            }
            ControllerKind::Random => Controller::Random,
            learned => {
                return Err(Error::Config(format!("`{}` needs a trained checkpoint", learned.name())));
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Controller::Agent(a) => a.kind.name(),
            Controller::Apf(_) => "apf",
            Controller::Mpc(_) => "mpc",
            Controller::Random => "random",
        }
    }

    /// Per-episode policy instance.
    pub fn policy(&self, seed: u64) -> Box<dyn Policy + '_> {
        match self {
            Controller::Agent(a) => Box::new(GreedyPolicy(a)),
            Controller::Apf(c) => Box::new(c.clone()),
            Controller::Mpc(c) => Box::new(c.clone()),
            Controller::Random => Box::new(RandomPolicy::new(seed ^ 0x7a11_d0d0)),
        }
    }

    /// Rejects controllers whose inputs disagree with the perception setup.
    pub fn check_compatible(&self, cfg: &LabConfig) -> Result<()> {
        if let Controller::Agent(a) = self {
            if a.slots != cfg.perception.max_objects {
                return Err(Error::Checkpoint(format!(
                    "checkpoint expects {} object slots, perception provides {}",
                    a.slots, cfg.perception.max_objects
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSet {
    pub label: String,
    pub num_robots: usize,
    pub num_buoys: usize,
    pub min_start_goal_distance: f64,
    pub world_size: f64,
    pub episodes: usize,
    pub timeout: f64,
    pub seed_base: u64,
}

impl ExperimentSet {
    pub fn from_spec(spec: &SetSpec, cfg: &LabConfig) -> Self {
        Self {
            label: spec.label.clone(),
            num_robots: spec.num_robots,
            num_buoys: spec.num_buoys,
            min_start_goal_distance: spec.min_start_goal_distance,
            world_size: spec.world_size,
            episodes: cfg.harness.episodes_per_set,
            timeout: cfg.world.timeout,
            seed_base: cfg.harness.seed_base,
        }
    }

    /// Every configured set.
    pub fn all(cfg: &LabConfig) -> Vec<Self> {
        cfg.harness.sets.iter().map(|s| Self::from_spec(s, cfg)).collect()
    }

    pub fn stage(&self) -> CurriculumStage {
        CurriculumStage {
            index: 0,
            num_robots: self.num_robots,
            num_buoys: self.num_buoys,
            min_start_goal_distance: self.min_start_goal_distance,
            duration: 0,
            world_size: self.world_size,
        }
    }

    pub fn episode_seed(&self, index: usize) -> u64 {
        self.seed_base + index as u64
    }

    pub fn scenario(&self, index: usize, cfg: &LabConfig) -> Result<Scenario> {
        generate_scenario(&self.stage(), &cfg.scenario, cfg.vessel.hull_radius, self.episode_seed(index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub set: String,
    pub controller: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over every vehicle that reached its goal; `None` if none did.
    pub avg_travel_time: Option<f64>,
    pub arrived_vehicles: usize,
}

pub fn summarize(set: &str, controller: &str, results: &[EpisodeResult]) -> MetricsSummary {
    let successes = results.iter().filter(|r| r.success).count();
    let times: Vec<f64> = results.iter().flat_map(|r| r.travel_times.iter().flatten().copied()).collect();
    MetricsSummary {
        set: set.to_string(),
        controller: controller.to_string(),
        episodes: results.len(),
        successes,
        success_rate: successes as f64 / results.len().max(1) as f64,
        avg_travel_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        arrived_vehicles: times.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetOutcome {
    pub summary: MetricsSummary,
    pub episodes: Vec<EpisodeResult>,
}

/// Runs every episode of `set` with `controller` driving all vehicles.
pub fn run_set(set: &ExperimentSet, controller: &Controller, cfg: &LabConfig, record: bool) -> Result<SetOutcome> {
    controller.check_compatible(cfg)?;
    let mut world = cfg.world_config();
    world.timeout = set.timeout;
    let settings = EpisodeSettings {
        world,
        perception: cfg.perception.clone(),
        reward: cfg.reward.clone(),
        record_trajectory: record,
    };
    let run = |i: usize| -> Result<EpisodeResult> {
        let scenario = set.scenario(i, cfg)?;
        let seed = set.episode_seed(i);
        let mut policy = controller.policy(seed);
        run_episode(&scenario, &settings, policy.as_mut(), seed)
    };
    let episodes: Vec<EpisodeResult> = if cfg.harness.parallel {
        (0..set.episodes).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..set.episodes).map(run).collect::<Result<_>>()?
    };
    Ok(SetOutcome { summary: summarize(&set.label, controller.name(), &episodes), episodes })
}

/// Rows = controllers, columns = sets; each cell is `success% / mean time`.
pub fn summary_table(rows: &[Vec<MetricsSummary>]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else { return out };
    out.push_str("controller");
    for s in first {
        let _ = write!(out, "\t{}", s.set);
    }
    out.push('\n');
    for row in rows {
        out.push_str(row.first().map_or("", |s| s.controller.as_str()));
        for s in row {
            let time = s.avg_travel_time.map_or_else(|| "-".to_string(), |t| format!("{t:.2}"));
            let _ = write!(out, "\t{:.0}% / {}", 100.0 * s.success_rate, time);
        }
        out.push('\n');
    }
    out
}
