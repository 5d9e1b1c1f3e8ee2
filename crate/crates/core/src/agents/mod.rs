//! Learning agents (AC-IQN, IQN, DQN, DDPG), their shared experience replay,
//! exploration, checkpoints and the curriculum training loop.

mod actions;
mod features;
mod losses;
mod replay;
mod train;
mod updates;

pub use actions::{Action, DiscreteActionTable, ACTION_LEVELS, NUM_DISCRETE_ACTIONS};
pub use features::FeatureScaling;
pub use losses::{huber, quantile_huber, quantile_huber_grad, quantile_regression_loss, squared_td_loss};
pub use replay::ReplayBuffer;
pub use train::{evaluate, stage_at, train, CurveRow, TrainOptions, TrainReport, TrainingConfig};
pub use updates::{
    ac_iqn_actor_objective, ac_iqn_update, argmax, ddpg_actor_objective, ddpg_update, dqn_update, iqn_policy,
    iqn_update, mean_quantiles, midpoint_taus, sample_taus, Batch,
};

use crate::config::LabConfig;
use crate::dynamics::{ThrustDelta, THRUST_RATE_LIMIT};
use crate::episode::Policy;
use crate::error::{Error, Result};
use crate::nn::{
    Actor, Adam, Checkpoint, Module, NetworkConfig, NetworkSpec, QuantileCritic, TargetPair, ValueNetwork,
};
use crate::perception::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// N: quantile samples for the online estimate.
    pub n_quantiles: usize,
    /// N′: quantile samples for the target.
    pub n_target_quantiles: usize,
    /// K: quantile samples for the discrete policy.
    pub k_policy: usize,
    pub huber_kappa: f64,
    /// β in the soft target update.
    pub target_blend: f64,
    /// Target networks blend every `target_period` updates.
    pub target_period: u64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which σ and ε anneal linearly.
    pub anneal_steps: u64,
    pub warmup_steps: usize,
    pub train_every: u64,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("agent: {m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if self.n_quantiles == 0 || self.n_target_quantiles == 0 || self.k_policy == 0 {
            return fail("quantile counts must be at least 1");
        }
        if self.huber_kappa <= 0.0 {
            return fail("huber_kappa must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return fail("batch size and buffer capacity must be positive");
        }
        if !(0.0..=1.0).contains(&self.target_blend) || self.target_period == 0 {
            return fail("target_blend must lie in [0, 1] and target_period be at least 1");
        }
        if self.lr_critic <= 0.0 || self.lr_actor <= 0.0 {
            return fail("learning rates must be positive");
        }
        if self.sigma_start < 0.0 || self.sigma_end < 0.0 {
            return fail("exploration noise must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon must lie in [0, 1]");
        }
        if self.train_every == 0 {
            return fail("train_every must be at least 1");
        }
        Ok(())
    }

    fn anneal(&self, start: f64, end: f64, step: u64) -> f64 {
        if self.anneal_steps == 0 {
            return end;
        }
        if step >= self.anneal_steps {
            return end;
        }
        start + (end - start) * (step as f64 / self.anneal_steps as f64)
    }

    pub fn sigma_at(&self, step: u64) -> f64 {
        self.anneal(self.sigma_start, self.sigma_end, step)
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        self.anneal(self.epsilon_start, self.epsilon_end, step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    AcIqn,
    Iqn,
    Dqn,
    Ddpg,
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::AcIqn => "ac-iqn",
            AgentKind::Iqn => "iqn",
            AgentKind::Dqn => "dqn",
            AgentKind::Ddpg => "ddpg",
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, AgentKind::AcIqn | AgentKind::Ddpg)
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ac-iqn" => Ok(AgentKind::AcIqn),
            "iqn" => Ok(AgentKind::Iqn),
            "dqn" => Ok(AgentKind::Dqn),
            "ddpg" => Ok(AgentKind::Ddpg),
            "sac" | "rainbow" => Err(Error::OutOfScope(s.to_string())),
            other => Err(Error::Config(format!("unknown agent `{other}`"))),
        }
    }
}

type NamedOptimizer<'a> = (&'static str, &'a Adam);

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Networks {
    AcIqn { critic: TargetPair<QuantileCritic>, actor: TargetPair<Actor>, critic_opt: Adam, actor_opt: Adam },
    Iqn { net: TargetPair<QuantileCritic>, opt: Adam },
    Dqn { net: TargetPair<ValueNetwork>, opt: Adam },
    Ddpg { critic: TargetPair<ValueNetwork>, actor: TargetPair<Actor>, critic_opt: Adam, actor_opt: Adam },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: AgentKind,
    pub config: AgentConfig,
    pub network: NetworkConfig,
    pub features: FeatureScaling,
    /// Object slots per observation.
    pub slots: usize,
    pub nets: Networks,
    /// Environment steps seen so far (drives the exploration schedule).
    pub env_steps: u64,
    pub updates: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    kind: AgentKind,
    agent: AgentConfig,
    network: NetworkConfig,
    features: FeatureScaling,
    slots: usize,
    env_steps: u64,
    updates: u64,
    specs: Vec<(String, NetworkSpec)>,
    optimizers: Vec<(String, Adam)>,
}

const CHECKPOINT_FORMAT: &str = "asvnav-agent";

impl Agent {
    pub fn new(
        kind: AgentKind,
        config: AgentConfig,
        network: NetworkConfig,
        features: FeatureScaling,
        slots: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(seed.wrapping_add(network.init_seed_offset));
        let outputs = NUM_DISCRETE_ACTIONS;
        let nets = match kind {
            AgentKind::AcIqn => Networks::AcIqn {
                critic: TargetPair::new(QuantileCritic::new(&network, 2, 1, &mut init)),
                actor: TargetPair::new(Actor::new(&network, &mut init)),
                critic_opt: Adam::new(config.lr_critic),
                actor_opt: Adam::new(config.lr_actor),
            },
            AgentKind::Iqn => Networks::Iqn {
                net: TargetPair::new(QuantileCritic::new(&network, 0, outputs, &mut init)),
                opt: Adam::new(config.lr_critic),
            },
            AgentKind::Dqn => Networks::Dqn {
                net: TargetPair::new(ValueNetwork::new(&network, 0, outputs, &mut init)),
                opt: Adam::new(config.lr_critic),
            },
            AgentKind::Ddpg => Networks::Ddpg {
                critic: TargetPair::new(ValueNetwork::new(&network, 2, 1, &mut init)),
                actor: TargetPair::new(Actor::new(&network, &mut init)),
                critic_opt: Adam::new(config.lr_critic),
                actor_opt: Adam::new(config.lr_actor),
            },
        };
        Ok(Self {
            kind,
            config,
            network,
            features,
            slots,
            nets,
            env_steps: 0,
            updates: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a_0f0f_f0f0),
        })
    }

    pub fn from_config(kind: AgentKind, cfg: &LabConfig, seed: u64) -> Result<Self> {
        Self::new(kind, cfg.agent.clone(), cfg.network.clone(), cfg.features.clone(), cfg.perception.max_objects, seed)
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma_at(self.env_steps)
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_at(self.env_steps)
    }

    fn batch_of(&self, obs: &Observation) -> crate::nn::StateBatch {
        self.features.batch([obs], self.slots)
    }

    /// Deterministic action: actor output, or argmax of the action values
    /// (quantile networks average a fixed midpoint grid of K fractions).
    pub fn greedy(&self, obs: &Observation) -> Result<Action> {
        let s = self.batch_of(obs);
        Ok(match &self.nets {
            Networks::AcIqn { actor, .. } | Networks::Ddpg { actor, .. } => {
                let a = actor.online.predict(&s);
                Action::Continuous([a[[0, 0]], a[[0, 1]]])
            }
            Networks::Iqn { net, .. } => {
                Action::Discrete(iqn_policy(&net.online, &s, &midpoint_taus(1, self.config.k_policy))?[0])
            }
            Networks::Dqn { net, .. } => {
                let q = net.online.predict(&s, None)?;
                Action::Discrete(argmax(q.row(0).iter().copied()))
            }
        })
    }

    /// Action for one vehicle; with `explore`, Gaussian noise (continuous)
    /// or ε-greedy (discrete) on top of the policy.
    pub fn select_action(&mut self, obs: &Observation, explore: bool) -> Result<Action> {
        if !explore {
            return self.greedy(obs);
        }
        match self.kind {
            AgentKind::AcIqn | AgentKind::Ddpg => {
                let Action::Continuous(a) = self.greedy(obs)? else { unreachable!("continuous agent") };
                let sigma = self.sigma() * THRUST_RATE_LIMIT;
                let mut noisy = a;
                if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("finite sigma");
                    for v in &mut noisy {
                        *v += normal.sample(&mut self.rng);
                    }
                }
                Ok(Action::Continuous(noisy.map(|v| v.clamp(-THRUST_RATE_LIMIT, THRUST_RATE_LIMIT))))
            }
            AgentKind::Iqn | AgentKind::Dqn => {
                if self.rng.random::<f64>() < self.epsilon() {
                    return Ok(Action::Discrete(self.rng.random_range(0..NUM_DISCRETE_ACTIONS)));
                }
                if let Networks::Iqn { net, .. } = &self.nets {
                    let taus = sample_taus(1, self.config.k_policy, &mut self.rng);
                    return Ok(Action::Discrete(iqn_policy(&net.online, &self.batch_of(obs), &taus)?[0]));
                }
                self.greedy(obs)
            }
        }
    }

    /// One gradient update on `batch`.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let it = self.updates;
        let cfg = &self.config;
        let stats = match &mut self.nets {
            Networks::AcIqn { critic, actor, critic_opt, actor_opt } => {
                let (l, j) = ac_iqn_update(critic, actor, critic_opt, actor_opt, batch, cfg, it, &mut self.rng)?;
                UpdateStats { critic_loss: l, actor_objective: Some(j) }
            }
            Networks::Iqn { net, opt } => {
                UpdateStats { critic_loss: iqn_update(net, opt, batch, cfg, it, &mut self.rng)?, actor_objective: None }
            }
            Networks::Dqn { net, opt } => {
                UpdateStats { critic_loss: dqn_update(net, opt, batch, cfg, it)?, actor_objective: None }
            }
            Networks::Ddpg { critic, actor, critic_opt, actor_opt } => {
                let (l, j) = ddpg_update(critic, actor, critic_opt, actor_opt, batch, cfg, it)?;
                UpdateStats { critic_loss: l, actor_objective: Some(j) }
            }
        };
        self.updates += 1;
        Ok(stats)
    }

    /// Samples a minibatch from `buffer` using the agent's generator.
    pub fn sample_batch(&mut self, buffer: &ReplayBuffer<Transition>) -> Batch {
        let picked = buffer.sample(self.config.batch_size, &mut self.rng);
        Batch::from_transitions(&picked, &self.features, self.slots)
    }

    fn modules(&self) -> (Vec<(&'static str, NetworkSpec)>, Vec<NamedOptimizer<'_>>) {
        match &self.nets {
            Networks::AcIqn { critic, actor, critic_opt, actor_opt } => (
                vec![("critic", critic.online.spec()), ("actor", actor.online.spec())],
                vec![("critic_opt", critic_opt), ("actor_opt", actor_opt)],
            ),
            Networks::Ddpg { critic, actor, critic_opt, actor_opt } => (
                vec![("critic", critic.online.spec()), ("actor", actor.online.spec())],
                vec![("critic_opt", critic_opt), ("actor_opt", actor_opt)],
            ),
            Networks::Iqn { net, opt } => (vec![("q", net.online.spec())], vec![("q_opt", opt)]),
            Networks::Dqn { net, opt } => (vec![("q", net.online.spec())], vec![("q_opt", opt)]),
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let (specs, opts) = self.modules();
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            kind: self.kind,
            agent: self.config.clone(),
            network: self.network.clone(),
            features: self.features.clone(),
            slots: self.slots,
            env_steps: self.env_steps,
            updates: self.updates,
            specs: specs.into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
            optimizers: opts.iter().map(|(n, o)| (n.to_string(), (*o).clone())).collect(),
        };
        let mut c = Checkpoint::new(serde_json::to_value(header)?);
        match &self.nets {
            Networks::AcIqn { critic, actor, critic_opt, actor_opt } => {
                c.push_module("critic.online", &critic.online);
                c.push_module("critic.target", &critic.target);
                c.push_module("actor.online", &actor.online);
                c.push_module("actor.target", &actor.target);
                c.push_optimizer("critic_opt", critic_opt);
                c.push_optimizer("actor_opt", actor_opt);
            }
            Networks::Ddpg { critic, actor, critic_opt, actor_opt } => {
                c.push_module("critic.online", &critic.online);
                c.push_module("critic.target", &critic.target);
                c.push_module("actor.online", &actor.online);
                c.push_module("actor.target", &actor.target);
                c.push_optimizer("critic_opt", critic_opt);
                c.push_optimizer("actor_opt", actor_opt);
            }
            Networks::Iqn { net, opt } => {
                c.push_module("q.online", &net.online);
                c.push_module("q.target", &net.target);
                c.push_optimizer("q_opt", opt);
            }
            Networks::Dqn { net, opt } => {
                c.push_module("q.online", &net.online);
                c.push_module("q.target", &net.target);
                c.push_optimizer("q_opt", opt);
            }
        }
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let header: CheckpointHeader =
            serde_json::from_value(c.header.clone()).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected checkpoint format `{}`", header.format)));
        }
        let mut agent = Agent::new(header.kind, header.agent, header.network, header.features, header.slots, 0)?;
        let (specs, _) = agent.modules();
        for (name, spec) in &header.specs {
            spec.validate()?;
            let ours = specs.iter().find(|(n, _)| n == name).map(|(_, s)| s);
            if ours != Some(spec) {
                return Err(Error::Checkpoint(format!("network `{name}` does not match its stored spec")));
            }
        }
        if specs.len() != header.specs.len() {
            return Err(Error::Checkpoint("checkpoint lists a different set of networks".into()));
        }
        let find_opt = |name: &str| -> Result<Adam> {
            header
                .optimizers
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, o)| o.clone())
                .ok_or_else(|| Error::Checkpoint(format!("missing optimizer {name}")))
        };
        match &mut agent.nets {
            Networks::AcIqn { critic, actor, critic_opt, actor_opt } => {
                c.restore_module("critic.online", &mut critic.online)?;
                c.restore_module("critic.target", &mut critic.target)?;
                c.restore_module("actor.online", &mut actor.online)?;
                c.restore_module("actor.target", &mut actor.target)?;
                *critic_opt = find_opt("critic_opt")?;
                *actor_opt = find_opt("actor_opt")?;
                c.restore_optimizer("critic_opt", critic_opt, &critic.online)?;
                c.restore_optimizer("actor_opt", actor_opt, &actor.online)?;
            }
            Networks::Ddpg { critic, actor, critic_opt, actor_opt } => {
                c.restore_module("critic.online", &mut critic.online)?;
                c.restore_module("critic.target", &mut critic.target)?;
                c.restore_module("actor.online", &mut actor.online)?;
                c.restore_module("actor.target", &mut actor.target)?;
                *critic_opt = find_opt("critic_opt")?;
                *actor_opt = find_opt("actor_opt")?;
                c.restore_optimizer("critic_opt", critic_opt, &critic.online)?;
                c.restore_optimizer("actor_opt", actor_opt, &actor.online)?;
            }
            Networks::Iqn { net, opt } => {
                c.restore_module("q.online", &mut net.online)?;
                c.restore_module("q.target", &mut net.target)?;
                *opt = find_opt("q_opt")?;
                c.restore_optimizer("q_opt", opt, &net.online)?;
            }
            Networks::Dqn { net, opt } => {
                c.restore_module("q.online", &mut net.online)?;
                c.restore_module("q.target", &mut net.target)?;
                *opt = find_opt("q_opt")?;
                c.restore_optimizer("q_opt", opt, &net.online)?;
            }
        }
        agent.env_steps = header.env_steps;
        agent.updates = header.updates;
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Greedy, non-learning view of an agent.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a>(pub &'a Agent);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, obs: &Observation) -> ThrustDelta {
        match self.0.greedy(obs) {
            Ok(a) => a.delta(),
            Err(e) => {
                log::error!("policy evaluation failed: {e}; holding thrust");
                ThrustDelta::default()
            }
        }
    }
}

/// Uniformly random joint discrete action.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &Observation) -> ThrustDelta {
        DiscreteActionTable.delta(self.rng.random_range(0..NUM_DISCRETE_ACTIONS))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(kind: AgentKind) -> Agent {
        let mut cfg = LabConfig::default();
        cfg.network.hidden = 16;
        cfg.network.ego_hidden = 8;
        cfg.network.object_hidden = 8;
        cfg.network.embedding_dim = 8;
        Agent::from_config(kind, &cfg, 5).unwrap()
    }

    fn obs() -> Observation {
        let s = crate::dynamics::VesselState::at_rest(crate::dynamics::Pose2D::new(0.0, 0.0, 0.0));
        crate::perception::build_observation(&s, crate::geometry::Vec2::new(10.0, 3.0), [], 5)
    }

    #[test]
    fn config_validation() {
        let mut c = LabConfig::default().agent;
        c.validate().unwrap();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn greedy_is_deterministic() {
        for kind in [AgentKind::AcIqn, AgentKind::Iqn, AgentKind::Dqn, AgentKind::Ddpg] {
            let mut a = agent(kind);
            let o = obs();
            let first = a.select_action(&o, false).unwrap();
            assert_eq!(a.select_action(&o, false).unwrap(), first);
        }
    }

    #[test]
    fn zero_sigma_equals_greedy() {
        let mut a = agent(AgentKind::AcIqn);
        a.config.sigma_start = 0.0;
        a.config.sigma_end = 0.0;
        let o = obs();
        assert_eq!(a.select_action(&o, true).unwrap(), a.greedy(&o).unwrap());
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let mut a = agent(AgentKind::Dqn);
        a.config.epsilon_start = 1.0;
        a.config.epsilon_end = 1.0;
        let o = obs();
        let mut counts = [0usize; NUM_DISCRETE_ACTIONS];
        let draws = 25_000;
        for _ in 0..draws {
            counts[a.select_action(&o, true).unwrap().discrete_index().unwrap()] += 1;
        }
        let expected = draws as f64 / 25.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 24 degrees of freedom, 0.999 quantile
        assert!(chi2 < 51.18, "chi-square {chi2}");
    }

    #[test]
    fn out_of_scope_agents() {
        assert!(matches!("sac".parse::<AgentKind>(), Err(Error::OutOfScope(_))));
        assert!(matches!("rainbow".parse::<AgentKind>(), Err(Error::OutOfScope(_))));
        assert!("ppo".parse::<AgentKind>().is_err());
    }

    #[test]
    fn schedules_anneal_linearly() {
        let c = LabConfig::default().agent;
        assert_eq!(c.sigma_at(0), c.sigma_start);
        assert!((c.sigma_at(c.anneal_steps / 2) - 0.5 * (c.sigma_start + c.sigma_end)).abs() < 1e-12);
        assert_eq!(c.epsilon_at(10 * c.anneal_steps), c.epsilon_end);
    }
}
