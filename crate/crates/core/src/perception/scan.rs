use crate::geometry::{unit_from_heading, Vec2};
use crate::world::World;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One planar LiDAR sweep. Beam `i` points at `start_angle + i·α` in the
/// sensor frame; `None` marks a beam without a return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub ranges: Vec<Option<f64>>,
    pub angular_resolution: f64,
    pub start_angle: f64,
    pub max_range: f64,
    pub timestamp: f64,
}

impl Scan {
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.start_angle + i as f64 * self.angular_resolution
    }

    pub fn point(&self, i: usize) -> Option<Vec2> {
        self.ranges[i].map(|r| unit_from_heading(self.beam_angle(i)) * r)
    }

    /// Whether the first and last beams are angular neighbours.
    pub fn is_full_circle(&self) -> bool {
        let span = self.angular_resolution * self.ranges.len() as f64;
        (span - 2.0 * PI).abs() < 1e-9
    }
}

/// Nearest positive intersection distance of a ray with a circle.
pub(crate) fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = center - origin;
    let b = dir.dot(&oc);
    let disc = b * b - (oc.norm_squared() - radius * radius);
    if disc < 0.0 {
        return None;
    }
    let t = b - disc.sqrt();
    (t > 0.0).then_some(t)
}

pub fn simulate_scan<R: Rng + ?Sized>(
    world: &World,
    ego: usize,
    beams: usize,
    max_range: f64,
    noise_std: f64,
    rng: &mut R,
) -> Scan {
    let state = &world.vehicles[ego].state;
    let origin = state.position();
    let alpha = 2.0 * PI / beams as f64;
    let hull = world.config.vessel.hull_radius;
    let circles: Vec<(Vec2, f64)> = world
        .vehicles
        .iter()
        .filter(|v| v.id != ego)
        .map(|v| (v.state.position(), hull))
        .chain(world.buoys.iter().map(|b| (b.center(), b.radius)))
        .filter(|(c, r)| (c - origin).norm() - r <= max_range + 1.0)
        .collect();
    let noise = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
    let ranges = (0..beams)
        .map(|i| {
            let dir = unit_from_heading(state.pose.yaw - PI + i as f64 * alpha);
            let hit = circles.iter().filter_map(|&(c, r)| ray_circle(origin, dir, c, r)).fold(f64::INFINITY, f64::min);
            if !hit.is_finite() {
                return None;
            }
            let measured = hit + noise.as_ref().map_or(0.0, |n| n.sample(rng));
            (measured > 0.0 && measured <= max_range).then_some(measured)
        })
        .collect();
    Scan { ranges, angular_resolution: alpha, start_angle: -PI, max_range, timestamp: world.time }
}
