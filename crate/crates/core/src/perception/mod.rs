//! Perception: simulated planar LiDAR, range-image segmentation,
//! odometry-compensated tracking, training-time noise injection, and the
//! ego-frame observation fed to every controller.

mod noise;
mod observation;
mod scan;
mod segment;
mod track;

pub use noise::{inject_noise, sample_von_mises, Covariance2, NoiseModel};
pub use observation::{build_observation, EgoState, ObjectState, Observation, EGO_DIM, OBJECT_DIM};
pub use scan::{simulate_scan, Scan};
pub use segment::{merge_angle, segment, should_merge, Cluster};
pub use track::{track, TrackedObject, Tracker};

use crate::geometry::Frame2;
use crate::world::World;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Objects slower than this are treated as static and skipped by COLREGs
/// checks.
pub const VEHICLE_SPEED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    /// Ground-truth object states.
    Exact,
    /// Ground-truth object states with position, velocity and radius noise.
    Noisy,
    /// Simulated scan → segmentation → tracking.
    Lidar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub mode: PerceptionMode,
    pub beams: usize,
    pub max_range: f64,
    pub range_noise_std: f64,
    /// Segmentation threshold θ, rad.
    pub segmentation_threshold: f64,
    pub association_gate: f64,
    /// Object slots exposed to the networks.
    pub max_objects: usize,
    pub noise: NoiseModel,
}

/// Per-episode perception front end; owns one tracker per vehicle.
#[derive(Debug, Clone)]
pub struct Perception {
    pub config: PerceptionConfig,
    trackers: Vec<Tracker>,
    rng: ChaCha8Rng,
}

impl Perception {
    pub fn new(config: PerceptionConfig, num_vehicles: usize, seed: u64) -> Self {
        let trackers = (0..num_vehicles).map(|_| Tracker::new(config.association_gate)).collect();
        Self { config, trackers, rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_9e3c) }
    }

    pub fn observe(&mut self, world: &World, id: usize) -> Observation {
        let vehicle = &world.vehicles[id];
        let objects = match self.config.mode {
            PerceptionMode::Exact => ground_truth_objects(world, id, self.config.max_range),
            PerceptionMode::Noisy => {
                let truth = ground_truth_objects(world, id, self.config.max_range);
                inject_noise(&truth, &self.config.noise, &mut self.rng)
            }
            PerceptionMode::Lidar => {
                let scan = simulate_scan(
                    world,
                    id,
                    self.config.beams,
                    self.config.max_range,
                    self.config.range_noise_std,
                    &mut self.rng,
                );
                let clusters = segment(&scan, self.config.segmentation_threshold);
                self.trackers[id]
                    .update(&clusters, vehicle.state.pose, world.time)
                    .into_iter()
                    .map(|t| ObjectState { position: t.position, velocity: t.velocity, radius: t.radius })
                    .collect()
            }
        };
        build_observation(&vehicle.state, vehicle.goal, objects, self.config.max_objects)
    }
}

/// True states of every other hull and buoy whose surface lies within
/// `max_range`, expressed in the ego frame.
pub fn ground_truth_objects(world: &World, id: usize, max_range: f64) -> Vec<ObjectState> {
    let ego = &world.vehicles[id].state;
    let frame = Frame2::new(ego.position(), ego.pose.yaw);
    let hull = world.config.vessel.hull_radius;
    let vessels =
        world.vehicles.iter().filter(|v| v.id != id).map(|v| (v.state.position(), v.state.world_velocity(), hull));
    let buoys = world.buoys.iter().map(|b| (b.center(), crate::geometry::Vec2::zeros(), b.radius));
    vessels
        .chain(buoys)
        .filter(|(p, _, r)| (p - ego.position()).norm() - r <= max_range)
        .map(|(p, v, r)| ObjectState {
            position: frame.to_local_point(p),
            velocity: frame.to_local_vector(v),
            radius: r,
        })
        .collect()
}
