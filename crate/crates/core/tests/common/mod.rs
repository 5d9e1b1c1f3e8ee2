#![allow(dead_code)]

use asvnav::agents::{ac_iqn_actor_objective, ddpg_actor_objective};
use asvnav::nn::{
    masked_max_pool, masked_max_pool_backward, relu, relu_backward, Actor, Linear, Module, NetworkConfig,
    QuantileCritic, StateBatch, ValueNetwork,
};
use asvnav::perception::{should_merge, Scan};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub const FD_STEP: f64 = 1e-5;

pub fn small_net() -> NetworkConfig {
    NetworkConfig { ego_hidden: 6, object_hidden: 5, hidden: 7, embedding_dim: 4, init_seed_offset: 0 }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_batch(rng: &mut ChaCha8Rng, batch: usize, slots: usize) -> StateBatch {
    StateBatch {
        ego: random_matrix(rng, batch, 7),
        objects: random_matrix(rng, batch * slots, 5),
        mask: (0..batch * slots).map(|_| rng.random_bool(0.7)).collect(),
        slots,
    }
}

pub fn random_actions(rng: &mut ChaCha8Rng, batch: usize) -> Array2<f64> {
    Array2::from_shape_fn((batch, 2), |_| rng.random_range(-900.0..900.0))
}

pub fn random_taus(rng: &mut ChaCha8Rng, batch: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((batch, n), |_| rng.random::<f64>())
}

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both vanish.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 =
        analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Moves every parameter off its initial value so biases are nonzero and no
/// pre-activation sits exactly on a ReLU kink.
pub fn jitter<M: Module>(net: &mut M, rng: &mut ChaCha8Rng) {
    for p in net.params_mut() {
        p.value.mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
    }
}

fn weighted_sum(y: &Array2<f64>, g: &Array2<f64>) -> f64 {
    (y * g).sum()
}

/// Central differences of `loss` with respect to every parameter of `net`.
pub fn fd_params<M: Module>(net: &mut M, loss: impl Fn(&mut M) -> f64) -> Vec<f64> {
    let shapes: Vec<(usize, usize)> = net.params().iter().map(|p| p.value.dim()).collect();
    let mut out = Vec::new();
    for (k, (r, c)) in shapes.into_iter().enumerate() {
        for i in 0..r {
            for j in 0..c {
                let orig = net.params()[k].value[[i, j]];
                net.params_mut()[k].value[[i, j]] = orig + FD_STEP;
                let plus = loss(net);
                net.params_mut()[k].value[[i, j]] = orig - FD_STEP;
                let minus = loss(net);
                net.params_mut()[k].value[[i, j]] = orig;
                out.push((plus - minus) / (2.0 * FD_STEP));
            }
        }
    }
    out
}

fn fd_matrix(x: &Array2<f64>, loss: impl Fn(&Array2<f64>) -> f64) -> Vec<f64> {
    let mut x = x.clone();
    let mut out = Vec::new();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, c]];
        x[[r, c]] = orig + FD_STEP;
        let plus = loss(&x);
        x[[r, c]] = orig - FD_STEP;
        let minus = loss(&x);
        x[[r, c]] = orig;
        out.push((plus - minus) / (2.0 * FD_STEP));
    }
    out
}

fn grads<M: Module>(net: &M) -> Vec<f64> {
    net.params().iter().flat_map(|p| p.grad.iter().copied().collect::<Vec<_>>()).collect()
}

pub fn linear_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (i, o, b) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..5));
    let mut layer = Linear::new(i, o, &mut rng);
    layer.bias.value = random_matrix(&mut rng, 1, o);
    let x = random_matrix(&mut rng, b, i);
    let g = random_matrix(&mut rng, b, o);
    let dx = layer.backward(&x, &g, true);
    let mut analytic: Vec<f64> = layer.weight.grad.iter().chain(layer.bias.grad.iter()).copied().collect();
    analytic.extend(dx.iter());
    let mut numeric = Vec::new();
    for which in 0..2 {
        let shape = if which == 0 { layer.weight.value.dim() } else { layer.bias.value.dim() };
        for idx in 0..shape.0 * shape.1 {
            let (r, c) = (idx / shape.1, idx % shape.1);
            let probe = |d: f64| {
                let mut l = layer.clone();
                let p = if which == 0 { &mut l.weight } else { &mut l.bias };
                p.value[[r, c]] += d;
                weighted_sum(&l.forward(&x), &g)
            };
            numeric.push((probe(FD_STEP) - probe(-FD_STEP)) / (2.0 * FD_STEP));
        }
    }
    numeric.extend(fd_matrix(&x, |x| weighted_sum(&layer.forward(x), &g)));
    rel_err(&analytic, &numeric)
}

pub fn relu_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = (rng.random_range(1..6), rng.random_range(1..6));
    let x = random_matrix(&mut rng, r, c).mapv(|v| if v.abs() < 1e-3 { v + 2e-3 } else { v });
    let g = random_matrix(&mut rng, r, c);
    let analytic = relu_backward(&relu(x.clone()), &g);
    let numeric = fd_matrix(&x, |x| weighted_sum(&relu(x.clone()), &g));
    rel_err(analytic.as_slice().unwrap(), &numeric)
}

pub fn pool_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (groups, slots, width) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..6));
    let x = random_matrix(&mut rng, groups * slots, width);
    let mask: Vec<bool> = (0..groups * slots).map(|_| rng.random_bool(0.7)).collect();
    let g = random_matrix(&mut rng, groups, width);
    let (_, arg) = masked_max_pool(&x, &mask, slots);
    let analytic = masked_max_pool_backward(&g, &arg, x.nrows());
    let numeric = fd_matrix(&x, |x| weighted_sum(&masked_max_pool(x, &mask, slots).0, &g));
    rel_err(analytic.as_slice().unwrap(), &numeric)
}

/// Parameter and action-input gradients of a continuous-action quantile critic.
pub fn quantile_critic_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots, n) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5));
    let mut net = QuantileCritic::new(&small_net(), 2, 1, &mut rng);
    jitter(&mut net, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    let a = random_actions(&mut rng, b);
    let taus = random_taus(&mut rng, b, n);
    let g = random_matrix(&mut rng, b * n, 1);
    let (_, cache) = net.forward(&s, Some(&a), &taus).unwrap();
    net.zero_grad();
    let da = net.backward(&cache, &g, true).unwrap();
    let mut analytic = grads(&net);
    analytic.extend(da.iter());
    let mut numeric = fd_params(&mut net, |m| weighted_sum(&m.predict(&s, Some(&a), &taus).unwrap(), &g));
    numeric.extend(fd_matrix(&a, |a| weighted_sum(&net.predict(&s, Some(a), &taus).unwrap(), &g)));
    rel_err(&analytic, &numeric)
}

/// Parameter gradients of a discrete-action quantile network.
pub fn quantile_network_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots, n) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5));
    let mut net = QuantileCritic::new(&small_net(), 0, 3, &mut rng);
    jitter(&mut net, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    let taus = random_taus(&mut rng, b, n);
    let g = random_matrix(&mut rng, b * n, 3);
    let (_, cache) = net.forward(&s, None, &taus).unwrap();
    net.zero_grad();
    net.backward(&cache, &g, true);
    let analytic = grads(&net);
    let numeric = fd_params(&mut net, |m| weighted_sum(&m.predict(&s, None, &taus).unwrap(), &g));
    rel_err(&analytic, &numeric)
}

/// Parameter (and, with an action input, action) gradients of a value network.
pub fn value_network_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots) = (rng.random_range(1..4), rng.random_range(1..4));
    let with_action = seed.is_multiple_of(2);
    let (adim, out) = if with_action { (2, 1) } else { (0, 4) };
    let mut net = ValueNetwork::new(&small_net(), adim, out, &mut rng);
    jitter(&mut net, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    let a = random_actions(&mut rng, b);
    let a_in = with_action.then_some(&a);
    let g = random_matrix(&mut rng, b, out);
    let (_, cache) = net.forward(&s, a_in).unwrap();
    net.zero_grad();
    let da = net.backward(&cache, &g, true);
    let mut analytic = grads(&net);
    let mut numeric = fd_params(&mut net, |m| weighted_sum(&m.predict(&s, a_in).unwrap(), &g));
    if let Some(da) = da {
        analytic.extend(da.iter());
        numeric.extend(fd_matrix(&a, |a| weighted_sum(&net.predict(&s, Some(a)).unwrap(), &g)));
    }
    rel_err(&analytic, &numeric)
}

/// Parameter gradients of the bounded actor, including the tanh scaling.
pub fn actor_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots) = (rng.random_range(1..4), rng.random_range(1..4));
    let mut net = Actor::new(&small_net(), &mut rng);
    jitter(&mut net, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    let g = random_matrix(&mut rng, b, 2);
    let (_, cache) = net.forward(&s);
    net.zero_grad();
    net.backward(&cache, &g);
    let analytic = grads(&net);
    let numeric = fd_params(&mut net, |m| weighted_sum(&m.predict(&s), &g));
    rel_err(&analytic, &numeric)
}

/// End-to-end actor gradient through a quantile critic's action input.
pub fn ac_iqn_chain_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots, n) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5));
    let mut critic = QuantileCritic::new(&small_net(), 2, 1, &mut rng);
    jitter(&mut critic, &mut rng);
    let mut actor = Actor::new(&small_net(), &mut rng);
    jitter(&mut actor, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    let tau_seed = rng.random::<u64>();
    let objective = |critic: &mut QuantileCritic, actor: &mut Actor| {
        ac_iqn_actor_objective(critic, actor, &s, n, &mut ChaCha8Rng::seed_from_u64(tau_seed)).unwrap()
    };
    objective(&mut critic, &mut actor);
    let analytic = grads(&actor);
    let numeric: Vec<f64> = fd_params(&mut actor, |a| -objective(&mut critic.clone(), a));
    rel_err(&analytic, &numeric)
}

/// End-to-end actor gradient through a deterministic critic's action input.
pub fn ddpg_chain_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, slots) = (rng.random_range(1..4), rng.random_range(1..4));
    let mut critic = ValueNetwork::new(&small_net(), 2, 1, &mut rng);
    jitter(&mut critic, &mut rng);
    let mut actor = Actor::new(&small_net(), &mut rng);
    jitter(&mut actor, &mut rng);
    let s = random_batch(&mut rng, b, slots);
    ddpg_actor_objective(&mut critic, &mut actor, &s).unwrap();
    let analytic = grads(&actor);
    let numeric: Vec<f64> = fd_params(&mut actor, |a| -ddpg_actor_objective(&mut critic.clone(), a, &s).unwrap());
    rel_err(&analytic, &numeric)
}

/// Worst case over `cases` seeds.
pub fn worst(cases: u64, f: fn(u64) -> f64) -> f64 {
    (0..cases).map(f).fold(0.0, f64::max)
}

/// Random synthetic range image: runs of smooth surfaces, range jumps and
/// missing returns, over either a full circle or a partial sector.
pub fn random_scan(rng: &mut ChaCha8Rng) -> (Scan, f64) {
    let n = rng.random_range(3..400);
    let full = rng.random_bool(0.5);
    let resolution = if full { 2.0 * std::f64::consts::PI / n as f64 } else { rng.random_range(0.002..0.05) };
    let mut ranges = Vec::with_capacity(n);
    let mut current: f64 = rng.random_range(1.0..19.0);
    for _ in 0..n {
        match rng.random_range(0..10) {
            0 => ranges.push(None),
            1 | 2 => {
                current = rng.random_range(0.5..19.9);
                ranges.push(Some(current));
            }
            _ => {
                current = (current + rng.random_range(-0.3..0.3)).clamp(0.3, 19.9);
                ranges.push(Some(current));
            }
        }
    }
    let theta = rng.random_range(0.02..0.6);
    (
        Scan {
            ranges,
            angular_resolution: resolution,
            start_angle: -std::f64::consts::PI,
            max_range: 20.0,
            timestamp: 0.0,
        },
        theta,
    )
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

/// Connected components of the beam graph whose edges join neighbouring
/// returns satisfying the merge predicate.
pub fn union_find_partition(scan: &Scan, theta: f64) -> BTreeSet<BTreeSet<usize>> {
    let n = scan.ranges.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let full = scan.is_full_circle() && n > 2;
    for i in 0..n {
        let j = if i + 1 < n {
            i + 1
        } else if full {
            0
        } else {
            continue;
        };
        if let (Some(a), Some(b)) = (scan.ranges[i], scan.ranges[j]) {
            if should_merge(a, b, scan.angular_resolution, theta) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for i in 0..n {
        if scan.ranges[i].is_some() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().insert(i);
        }
    }
    groups.into_values().collect()
}
