//! Closed-loop episodes: every vehicle is driven by the same controller
//! through the shared perception front end.

use crate::colregs::{reward, RewardConfig};
use crate::dynamics::ThrustDelta;
use crate::error::Result;
use crate::perception::{Observation, Perception, PerceptionConfig};
use crate::world::{EventKind, Scenario, World, WorldConfig, WorldEvent};
use serde::{Deserialize, Serialize};

/// A controller mapping one vehicle's observation to a thrust change.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> ThrustDelta;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn act(&mut self, obs: &Observation) -> ThrustDelta {
        (**self).act(obs)
    }
}

/// One timestamped vehicle sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub vehicle: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub thrust_left: f64,
    pub thrust_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub success: bool,
    /// Arrival time per vehicle, `None` for vehicles that never arrived.
    pub travel_times: Vec<Option<f64>>,
    pub events: Vec<WorldEvent>,
    /// Undiscounted reward sum per vehicle.
    pub returns: Vec<f64>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<TrajectoryRecord>,
}

impl EpisodeResult {
    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSettings {
    pub world: WorldConfig,
    pub perception: PerceptionConfig,
    pub reward: RewardConfig,
    pub record_trajectory: bool,
}

fn record(world: &World, out: &mut Vec<TrajectoryRecord>) {
    for v in &world.vehicles {
        let s = &v.state;
        out.push(TrajectoryRecord {
            t: world.time,
            vehicle: v.id,
            x: s.pose.x,
            y: s.pose.y,
            yaw: s.pose.yaw,
            u: s.velocity.u,
            v: s.velocity.v,
            r: s.velocity.r,
            thrust_left: s.thrusts.left,
            thrust_right: s.thrusts.right,
        });
    }
}

pub fn run_episode(
    scenario: &Scenario,
    settings: &EpisodeSettings,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut world = World::new(scenario, settings.world.clone(), seed);
    let n = world.vehicles.len();
    let mut perception = Perception::new(settings.perception.clone(), n, seed);
    let mut obs: Vec<Observation> = (0..n).map(|i| perception.observe(&world, i)).collect();
    let mut returns = vec![0.0; n];
    let mut events = Vec::new();
    let mut trajectory = Vec::new();
    if settings.record_trajectory {
        record(&world, &mut trajectory);
    }
    let mut steps = 0;
    while !world.is_done() {
        let active: Vec<usize> = world.active_ids().collect();
        let mut actions = vec![None; n];
        for &i in &active {
            actions[i] = Some(policy.act(&obs[i]));
        }
        let step_events = world.step(&actions)?;
        steps += 1;
        for &i in &active {
            let next = perception.observe(&world, i);
            let kind = step_events.iter().find(|e| e.vehicle == i).map(|e| e.kind);
            returns[i] += reward(&obs[i], &next, kind, &settings.reward).total;
            obs[i] = next;
        }
        events.extend(step_events);
        if settings.record_trajectory {
            record(&world, &mut trajectory);
        }
    }
    let travel_times = world
        .vehicles
        .iter()
        .map(|v| match v.terminal {
            Some(WorldEvent { kind: EventKind::GoalReached, time, .. }) => Some(time),
            _ => None,
        })
        .collect();
    Ok(EpisodeResult { seed, success: world.succeeded(), travel_times, events, returns, steps, trajectory })
}
