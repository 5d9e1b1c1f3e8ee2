//! Multi-vehicle world: curriculum scenarios, synchronized stepping and
//! terminal-event detection.

use crate::dynamics::{
    advance_control_step, DisturbanceModel, GeneralizedForce, Pose2D, ThrustDelta, Timing, VesselParams, VesselState,
};
use crate::error::{Error, Result};
use crate::geometry::{heading_of, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buoy {
    pub position: [f64; 2],
    pub radius: f64,
}

impl Buoy {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }
}

/// Anything with a circular collision footprint.
pub trait Collider {
    fn center(&self) -> Vec2;
    fn radius(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Collider for Circle {
    fn center(&self) -> Vec2 {
        self.center
    }
    fn radius(&self) -> f64 {
        self.radius
    }
}

impl Collider for Buoy {
    fn center(&self) -> Vec2 {
        Buoy::center(self)
    }
    fn radius(&self) -> f64 {
        self.radius
    }
}

/// Strict overlap test: touching circles do not collide.
pub fn check_collision(a: &impl Collider, b: &impl Collider) -> bool {
    (a.center() - b.center()).norm() < a.radius() + b.radius()
}

/// One row of the training curriculum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub index: usize,
    pub num_robots: usize,
    pub num_buoys: usize,
    pub min_start_goal_distance: f64,
    /// Environment timesteps spent in this stage.
    pub duration: u64,
    /// Side of the square arena, m.
    pub world_size: f64,
}

impl CurriculumStage {
    /// The six-stage schedule (robots, buoys, min start-goal distance). The
    /// arena size and duration are deployment choices and come from config.
    pub const SCHEDULE: [(usize, usize, f64); 6] =
        [(3, 0, 30.0), (4, 0, 35.0), (5, 0, 40.0), (5, 2, 40.0), (5, 3, 40.0), (5, 4, 40.0)];

    pub fn validate(&self) -> Result<()> {
        if self.num_robots == 0 || self.min_start_goal_distance <= 0.0 || self.world_size <= 0.0 {
            return Err(Error::Config(format!("invalid curriculum stage {self:?}")));
        }
        if self.min_start_goal_distance >= self.world_size * std::f64::consts::SQRT_2 {
            return Err(Error::Config(format!(
                "stage {}: start-goal distance {} cannot fit in a {} m arena",
                self.index, self.min_start_goal_distance, self.world_size
            )));
        }
        Ok(())
    }
}

/// Parameters for placing entities inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Extra gap required between spawned entities, m.
    pub clearance: f64,
    pub buoy_radius_min: f64,
    pub buoy_radius_max: f64,
    /// Initial heading = bearing to goal + U(−jitter, jitter), rad.
    pub heading_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub starts: Vec<Pose2D>,
    pub goals: Vec<[f64; 2]>,
    pub buoys: Vec<Buoy>,
    /// Side of the square arena centred on the origin, m.
    pub world_size: f64,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn generate_scenario(
    stage: &CurriculumStage,
    cfg: &ScenarioConfig,
    hull_radius: f64,
    seed: u64,
) -> Result<Scenario> {
    stage.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = stage.world_size / 2.0;
    let mut attempts = 0usize;
    let mut starts: Vec<Vec2> = Vec::new();
    let mut goals: Vec<Vec2> = Vec::new();
    let mut headings = Vec::new();
    let vessel_gap = 2.0 * hull_radius + cfg.clearance;

    let sample = |rng: &mut ChaCha8Rng, margin: f64| {
        let lim = half - margin;
        Vec2::new(rng.random_range(-lim..=lim), rng.random_range(-lim..=lim))
    };
    let fail = |reason: &str| Error::SamplingFailed { attempts: MAX_SAMPLING_ATTEMPTS, reason: reason.into() };

    while starts.len() < stage.num_robots {
        attempts += 1;
        if attempts > MAX_SAMPLING_ATTEMPTS {
            return Err(fail("vehicle start/goal pairs"));
        }
        let start = sample(&mut rng, hull_radius);
        let goal = sample(&mut rng, hull_radius);
        if (goal - start).norm() < stage.min_start_goal_distance {
            continue;
        }
        if starts.iter().any(|s| (s - start).norm() <= vessel_gap)
            || goals.iter().any(|g| (g - goal).norm() <= vessel_gap)
        {
            continue;
        }
        let jitter =
            if cfg.heading_jitter > 0.0 { rng.random_range(-cfg.heading_jitter..cfg.heading_jitter) } else { 0.0 };
        headings.push(heading_of(goal - start) + jitter);
        starts.push(start);
        goals.push(goal);
    }

    let mut buoys: Vec<Buoy> = Vec::new();
    while buoys.len() < stage.num_buoys {
        attempts += 1;
        if attempts > MAX_SAMPLING_ATTEMPTS {
            return Err(fail("buoys"));
        }
        let radius = if cfg.buoy_radius_max > cfg.buoy_radius_min {
            rng.random_range(cfg.buoy_radius_min..cfg.buoy_radius_max)
        } else {
            cfg.buoy_radius_min
        };
        let c = sample(&mut rng, radius);
        let gap = radius + hull_radius + cfg.clearance;
        if starts.iter().chain(goals.iter()).any(|p| (p - c).norm() <= gap) {
            continue;
        }
        if buoys.iter().any(|b| (b.center() - c).norm() <= b.radius + radius + cfg.clearance) {
            continue;
        }
        buoys.push(Buoy { position: [c.x, c.y], radius });
    }

    Ok(Scenario {
        starts: starts.iter().zip(&headings).map(|(s, &h)| Pose2D::new(s.x, s.y, h)).collect(),
        goals: goals.iter().map(|g| [g.x, g.y]).collect(),
        buoys,
        world_size: stage.world_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Collision,
    GoalReached,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub kind: EventKind,
    pub vehicle: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub vessel: VesselParams,
    pub timing: Timing,
    pub goal_radius: f64,
    /// Simulated seconds after which unfinished vehicles time out.
    pub timeout: f64,
    pub disturbance: Option<DisturbanceModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub state: VesselState,
    pub goal: Vec2,
    pub terminal: Option<WorldEvent>,
}

impl Vehicle {
    pub fn is_active(&self) -> bool {
        self.terminal.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub vehicles: Vec<Vehicle>,
    pub buoys: Vec<Buoy>,
    pub time: f64,
    pub world_size: f64,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(scenario: &Scenario, config: WorldConfig, seed: u64) -> Self {
        let vehicles = scenario
            .starts
            .iter()
            .zip(&scenario.goals)
            .enumerate()
            .map(|(id, (start, goal))| Vehicle {
                id,
                state: VesselState::at_rest(*start),
                goal: Vec2::new(goal[0], goal[1]),
                terminal: None,
            })
            .collect();
        Self {
            config,
            vehicles,
            buoys: scenario.buoys.clone(),
            time: 0.0,
            world_size: scenario.world_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn hull(&self, id: usize) -> Circle {
        Circle { center: self.vehicles[id].state.position(), radius: self.config.vessel.hull_radius }
    }

    pub fn is_done(&self) -> bool {
        self.vehicles.iter().all(|v| !v.is_active())
    }

    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.vehicles.iter().filter(|v| v.is_active()).map(|v| v.id)
    }

    /// Advances every active vehicle one control step. All vehicles read the
    /// pre-step snapshot; events are evaluated on the post-step snapshot.
    pub fn step(&mut self, actions: &[Option<ThrustDelta>]) -> Result<Vec<WorldEvent>> {
        if actions.len() != self.vehicles.len() {
            return Err(Error::Dimension(format!("{} actions for {} vehicles", actions.len(), self.vehicles.len())));
        }
        let mut next = Vec::with_capacity(self.vehicles.len());
        for (vehicle, action) in self.vehicles.iter().zip(actions) {
            if !vehicle.is_active() {
                if action.is_some() {
                    log::warn!("ignoring action for inactive vehicle {}", vehicle.id);
                }
                next.push(vehicle.state);
                continue;
            }
            let delta = action.unwrap_or_else(|| {
                log::warn!("no action for active vehicle {}; holding thrust", vehicle.id);
                ThrustDelta::default()
            });
            let disturbance = match self.config.disturbance {
                Some(d) => d.sample(&mut self.rng),
                None => GeneralizedForce::ZERO,
            };
            let s = advance_control_step(&vehicle.state, delta, disturbance, &self.config.vessel, self.config.timing)
                .map_err(|_| Error::NonFiniteState { time: self.time })?;
            next.push(s);
        }
        for (vehicle, s) in self.vehicles.iter_mut().zip(next) {
            vehicle.state = s;
        }
        self.time += self.config.timing.dt_control;

        let mut events = Vec::new();
        for i in 0..self.vehicles.len() {
            if !self.vehicles[i].is_active() {
                continue;
            }
            let hull = self.hull(i);
            let collided = (0..self.vehicles.len()).any(|j| j != i && check_collision(&hull, &self.hull(j)))
                || self.buoys.iter().any(|b| check_collision(&hull, b));
            let kind = if collided {
                Some(EventKind::Collision)
            } else if (hull.center - self.vehicles[i].goal).norm() <= self.config.goal_radius {
                Some(EventKind::GoalReached)
            } else if self.time >= self.config.timeout - 1e-9 {
                Some(EventKind::Timeout)
            } else {
                None
            };
            if let Some(kind) = kind {
                let event = WorldEvent { kind, vehicle: i, time: self.time };
                events.push(event);
            }
        }
        for e in &events {
            self.vehicles[e.vehicle].terminal = Some(*e);
        }
        Ok(events)
    }

    /// Episode success: every vehicle reached its goal, none collided, and
    /// none ran out of time.
    pub fn succeeded(&self) -> bool {
        self.vehicles.iter().all(|v| matches!(v.terminal, Some(WorldEvent { kind: EventKind::GoalReached, .. })))
    }
}
