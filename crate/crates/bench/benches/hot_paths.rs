use asvnav::agents::{DiscreteActionTable, RandomPolicy, ReplayBuffer};
use asvnav::harness::ExperimentSet;
use asvnav::perception::{segment, simulate_scan, Perception};
use asvnav::{Action, Agent, AgentKind, LabConfig, Policy, ThrustDelta, Transition, World};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn busiest_world(cfg: &LabConfig) -> World {
    let set = ExperimentSet::all(cfg).pop().expect("configured sets");
    let scenario = set.scenario(0, cfg).expect("scenario samples");
    World::new(&scenario, cfg.world_config(), 1)
}

fn world_step(c: &mut Criterion) {
    let cfg = LabConfig::default();
    let world = busiest_world(&cfg);
    let actions = vec![Some(ThrustDelta { left: 500.0, right: 0.0 }); world.vehicles.len()];
    c.bench_function("world_step_5_rob_4_obs", |b| {
        b.iter_batched(|| world.clone(), |mut w| black_box(w.step(&actions).unwrap()), BatchSize::SmallInput)
    });
}

fn perception(c: &mut Criterion) {
    let cfg = LabConfig::default();
    let world = busiest_world(&cfg);
    let p = &cfg.perception;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scan = simulate_scan(&world, 0, p.beams, p.max_range, p.range_noise_std, &mut rng);
    c.bench_function("simulate_scan", |b| {
        b.iter(|| black_box(simulate_scan(&world, 0, p.beams, p.max_range, p.range_noise_std, &mut rng)))
    });
    c.bench_function("segment_scan", |b| b.iter(|| black_box(segment(&scan, p.segmentation_threshold))));
    let mut front_end = Perception::new(p.clone(), world.vehicles.len(), 4);
    c.bench_function("observe_noisy", |b| b.iter(|| black_box(front_end.observe(&world, 0))));
}

fn filled_buffer(cfg: &LabConfig) -> ReplayBuffer<Transition> {
    let mut world = busiest_world(cfg);
    let mut perception = Perception::new(cfg.perception.clone(), world.vehicles.len(), 5);
    let mut policy = RandomPolicy::new(6);
    let mut buffer = ReplayBuffer::new(1024);
    while buffer.len() < 512 && !world.is_done() {
        let obs: Vec<_> = (0..world.vehicles.len()).map(|i| perception.observe(&world, i)).collect();
        let actions: Vec<_> = obs.iter().map(|o| Some(policy.act(o))).collect();
        world.step(&actions).unwrap();
        for (i, o) in obs.into_iter().enumerate() {
            let next = perception.observe(&world, i);
            let index = DiscreteActionTable.index_of(actions[i].unwrap()).unwrap();
            buffer.push(Transition {
                state: o,
                action: Action::Discrete(index),
                reward: -0.1,
                next_state: next,
                done: false,
            });
        }
    }
    buffer
}

fn updates(c: &mut Criterion) {
    let cfg = LabConfig::default();
    let buffer = filled_buffer(&cfg);
    let mut group = c.benchmark_group("update");
    group.sample_size(20);
    for kind in [AgentKind::AcIqn, AgentKind::Iqn, AgentKind::Dqn, AgentKind::Ddpg] {
        let mut agent = Agent::from_config(kind, &cfg, 7).unwrap();
        let batch = agent.sample_batch(&buffer);
        group.bench_function(kind.name(), |b| b.iter(|| black_box(agent.update(&batch).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, world_step, perception, updates);
criterion_main!(benches);
