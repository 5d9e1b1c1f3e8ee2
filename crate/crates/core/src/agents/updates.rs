use super::losses::{quantile_regression_loss, squared_td_loss};
use super::{Action, AgentConfig, FeatureScaling, Transition};
use crate::error::{Error, Result};
use crate::nn::{Actor, Adam, Module, QuantileCritic, StateBatch, TargetPair, ValueNetwork};
use ndarray::Array2;
use rand::Rng;

/// Minibatch in network-ready form.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: StateBatch,
    /// `M × 2` thrust changes, N/s (the table pair for discrete actions).
    pub actions: Array2<f64>,
    /// Joint discrete index per sample (0 for continuous actions).
    pub indices: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: StateBatch,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(transitions: &[&Transition], scaling: &FeatureScaling, slots: usize) -> Self {
        let states = scaling.batch(transitions.iter().map(|t| &t.state), slots);
        let next_states = scaling.batch(transitions.iter().map(|t| &t.next_state), slots);
        let mut actions = Array2::zeros((transitions.len(), 2));
        for (b, t) in transitions.iter().enumerate() {
            let d = t.action.delta();
            actions[[b, 0]] = d.left;
            actions[[b, 1]] = d.right;
        }
        Self {
            states,
            actions,
            indices: transitions.iter().map(|t| t.action.discrete_index().unwrap_or(0)).collect(),
            rewards: transitions.iter().map(|t| t.reward).collect(),
            next_states,
            dones: transitions.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn bootstrap(&self, b: usize, gamma: f64) -> f64 {
        if self.dones[b] {
            0.0
        } else {
            gamma
        }
    }
}

impl Transition {
    pub fn new(
        state: crate::perception::Observation,
        action: Action,
        reward: f64,
        next_state: crate::perception::Observation,
        done: bool,
    ) -> Self {
        Self { state, action, reward, next_state, done }
    }
}

/// `rows × cols` quantile fractions drawn from U([0, 1]).
pub fn sample_taus<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
}

/// Deterministic evenly spaced fractions `(k − ½)/K` for every row.
pub fn midpoint_taus(rows: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, k), |(_, j)| (j as f64 + 0.5) / k as f64)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-sample, per-action mean over the `K` quantile columns of `taus`.
pub fn mean_quantiles(net: &QuantileCritic, states: &StateBatch, taus: &Array2<f64>) -> Result<Array2<f64>> {
    let z = net.predict(states, None, taus)?;
    let k = taus.ncols();
    let mut q = Array2::zeros((states.len(), net.outputs()));
    for (r, row) in z.outer_iter().enumerate() {
        let mut acc = q.row_mut(r / k);
        acc.scaled_add(1.0 / k as f64, &row);
    }
    Ok(q)
}

/// Greedy discrete action under the quantile-averaged value.
pub fn iqn_policy(net: &QuantileCritic, states: &StateBatch, taus: &Array2<f64>) -> Result<Vec<usize>> {
    let q = mean_quantiles(net, states, taus)?;
    Ok(q.outer_iter().map(|row| argmax(row.iter().copied())).collect())
}

fn maybe_soft_update<M: Module + Clone>(pair: &mut TargetPair<M>, cfg: &AgentConfig, iteration: u64) {
    if (iteration + 1).is_multiple_of(cfg.target_period) {
        pair.soft_update(cfg.target_blend);
    }
}

fn check_finite(label: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{label} is {value}")))
    }
}

/// Distributional TD update of a discrete-action quantile network.
pub fn iqn_update<R: Rng + ?Sized>(
    net: &mut TargetPair<QuantileCritic>,
    opt: &mut Adam,
    batch: &Batch,
    cfg: &AgentConfig,
    iteration: u64,
    rng: &mut R,
) -> Result<f64> {
    let m = batch.len();
    let taus = sample_taus(m, cfg.n_quantiles, rng);
    let taus_next = sample_taus(m, cfg.n_target_quantiles, rng);
    let taus_policy = sample_taus(m, cfg.k_policy, rng);
    let next_actions = iqn_policy(&net.target, &batch.next_states, &taus_policy)?;
    let z_next = net.target.predict(&batch.next_states, None, &taus_next)?;
    let nt = cfg.n_target_quantiles;
    let targets = Array2::from_shape_fn((m, nt), |(b, j)| {
        batch.rewards[b] + batch.bootstrap(b, cfg.gamma) * z_next[[b * nt + j, next_actions[b]]]
    });
    let (z, cache) = net.online.forward(&batch.states, None, &taus)?;
    let n = cfg.n_quantiles;
    let pred = Array2::from_shape_fn((m, n), |(b, i)| z[[b * n + i, batch.indices[b]]]);
    let (loss, grad) = quantile_regression_loss(&pred, &taus, &targets, cfg.huber_kappa)?;
    let mut dz = Array2::zeros(z.raw_dim());
    for b in 0..m {
        for i in 0..n {
            dz[[b * n + i, batch.indices[b]]] = grad[[b, i]];
        }
    }
    net.online.zero_grad();
    net.online.backward(&cache, &dz, true);
    opt.step(net.online.params_mut())?;
    maybe_soft_update(net, cfg, iteration);
    Ok(loss)
}

/// Quantile regression loss of a continuous-action critic with targets from
/// the target actor; leaves the critic's gradients accumulated.
fn ac_iqn_critic_loss<R: Rng + ?Sized>(
    critic: &mut TargetPair<QuantileCritic>,
    actor_target: &Actor,
    batch: &Batch,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<f64> {
    let m = batch.len();
    let taus = sample_taus(m, cfg.n_quantiles, rng);
    let taus_next = sample_taus(m, cfg.n_target_quantiles, rng);
    let next_actions = actor_target.predict(&batch.next_states);
    let z_next = critic.target.predict(&batch.next_states, Some(&next_actions), &taus_next)?;
    let nt = cfg.n_target_quantiles;
    let targets = Array2::from_shape_fn((m, nt), |(b, j)| {
        batch.rewards[b] + batch.bootstrap(b, cfg.gamma) * z_next[[b * nt + j, 0]]
    });
    let (z, cache) = critic.online.forward(&batch.states, Some(&batch.actions), &taus)?;
    let n = cfg.n_quantiles;
    let pred = z.into_shape_with_order((m, n)).map_err(|e| Error::Dimension(e.to_string()))?;
    let (loss, grad) = quantile_regression_loss(&pred, &taus, &targets, cfg.huber_kappa)?;
    let dz = grad.into_shape_with_order((m * n, 1)).map_err(|e| Error::Dimension(e.to_string()))?;
    critic.online.zero_grad();
    critic.online.backward(&cache, &dz, true);
    Ok(loss)
}

/// Actor objective `J = mean_b (1/N) Σ_i Z_{τ_i}(s_b, π(s_b))`; accumulates
/// `∇(−J)` into the actor through the critic's action gradient.
pub fn ac_iqn_actor_objective<R: Rng + ?Sized>(
    critic: &mut QuantileCritic,
    actor: &mut Actor,
    states: &StateBatch,
    n_quantiles: usize,
    rng: &mut R,
) -> Result<f64> {
    let m = states.len();
    let taus = sample_taus(m, n_quantiles, rng);
    let (a, actor_cache) = actor.forward(states);
    let (z, cache) = critic.forward(states, Some(&a), &taus)?;
    let objective = z.mean().unwrap_or(0.0);
    check_finite("actor objective", objective)?;
    let dz = Array2::from_elem(z.raw_dim(), -1.0 / z.len() as f64);
    let d_action = critic.backward(&cache, &dz, false).expect("critic has an action input");
    actor.zero_grad();
    actor.backward(&actor_cache, &d_action);
    Ok(objective)
}

/// One actor-critic distributional update: both gradients are taken at the
/// current parameters, then both networks step, then targets blend.
#[allow(clippy::too_many_arguments)]
pub fn ac_iqn_update<R: Rng + ?Sized>(
    critic: &mut TargetPair<QuantileCritic>,
    actor: &mut TargetPair<Actor>,
    critic_opt: &mut Adam,
    actor_opt: &mut Adam,
    batch: &Batch,
    cfg: &AgentConfig,
    iteration: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let loss = ac_iqn_critic_loss(critic, &actor.target, batch, cfg, rng)?;
    let objective = ac_iqn_actor_objective(&mut critic.online, &mut actor.online, &batch.states, cfg.n_quantiles, rng)?;
    critic_opt.step(critic.online.params_mut())?;
    actor_opt.step(actor.online.params_mut())?;
    maybe_soft_update(critic, cfg, iteration);
    maybe_soft_update(actor, cfg, iteration);
    Ok((loss, objective))
}

/// Squared TD update with a max over the target network's action values.
pub fn dqn_update(
    net: &mut TargetPair<ValueNetwork>,
    opt: &mut Adam,
    batch: &Batch,
    cfg: &AgentConfig,
    iteration: u64,
) -> Result<f64> {
    let q_next = net.target.predict(&batch.next_states, None)?;
    let targets: Vec<f64> = (0..batch.len())
        .map(|b| {
            let best = q_next.row(b).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            batch.rewards[b] + batch.bootstrap(b, cfg.gamma) * best
        })
        .collect();
    let (q, cache) = net.online.forward(&batch.states, None)?;
    let pred: Vec<f64> = (0..batch.len()).map(|b| q[[b, batch.indices[b]]]).collect();
    let (loss, grad) = squared_td_loss(&pred, &targets)?;
    let mut dq = Array2::zeros(q.raw_dim());
    for (b, g) in grad.into_iter().enumerate() {
        dq[[b, batch.indices[b]]] = g;
    }
    net.online.zero_grad();
    net.online.backward(&cache, &dq, true);
    opt.step(net.online.params_mut())?;
    maybe_soft_update(net, cfg, iteration);
    Ok(loss)
}

/// Actor objective `J = mean_b Q(s_b, π(s_b))`, accumulating `∇(−J)`.
pub fn ddpg_actor_objective(critic: &mut ValueNetwork, actor: &mut Actor, states: &StateBatch) -> Result<f64> {
    let (a, actor_cache) = actor.forward(states);
    let (q, cache) = critic.forward(states, Some(&a))?;
    let objective = q.mean().unwrap_or(0.0);
    check_finite("actor objective", objective)?;
    let dq = Array2::from_elem(q.raw_dim(), -1.0 / q.len() as f64);
    let d_action = critic.backward(&cache, &dq, false).expect("critic has an action input");
    actor.zero_grad();
    actor.backward(&actor_cache, &d_action);
    Ok(objective)
}

/// Deterministic policy-gradient update with a squared TD critic loss.
pub fn ddpg_update(
    critic: &mut TargetPair<ValueNetwork>,
    actor: &mut TargetPair<Actor>,
    critic_opt: &mut Adam,
    actor_opt: &mut Adam,
    batch: &Batch,
    cfg: &AgentConfig,
    iteration: u64,
) -> Result<(f64, f64)> {
    let next_actions = actor.target.predict(&batch.next_states);
    let q_next = critic.target.predict(&batch.next_states, Some(&next_actions))?;
    let targets: Vec<f64> =
        (0..batch.len()).map(|b| batch.rewards[b] + batch.bootstrap(b, cfg.gamma) * q_next[[b, 0]]).collect();
    let (q, cache) = critic.online.forward(&batch.states, Some(&batch.actions))?;
    let pred: Vec<f64> = q.column(0).to_vec();
    let (loss, grad) = squared_td_loss(&pred, &targets)?;
    let dq = Array2::from_shape_vec((batch.len(), 1), grad).expect("one column");
    critic.online.zero_grad();
    critic.online.backward(&cache, &dq, true);
    let objective = ddpg_actor_objective(&mut critic.online, &mut actor.online, &batch.states)?;
    critic_opt.step(critic.online.params_mut())?;
    actor_opt.step(actor.online.params_mut())?;
    maybe_soft_update(critic, cfg, iteration);
    maybe_soft_update(actor, cfg, iteration);
    Ok((loss, objective))
}
