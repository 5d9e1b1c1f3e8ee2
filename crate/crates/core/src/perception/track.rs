use super::segment::Cluster;
use super::VEHICLE_SPEED_THRESHOLD;
use crate::dynamics::Pose2D;
use crate::geometry::{Frame2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    /// Ego frame, m.
    pub position: Vec2,
    /// Ego frame, m/s, compensated for ego motion.
    pub velocity: Vec2,
    pub radius: f64,
    pub is_vehicle: bool,
}

fn frame(pose: &Pose2D) -> Frame2 {
    Frame2::new(pose.position(), pose.yaw)
}

/// Associates current clusters with the previous frame's clusters and
/// estimates their velocities.
///
/// Previous centroids are moved into the current ego frame with the
/// odometry transform, then matched greedily by increasing distance within
/// `gate`. Unmatched clusters get zero velocity.
pub fn track(
    prev: &[Cluster],
    prev_pose: &Pose2D,
    current: &[Cluster],
    pose: &Pose2D,
    dt: f64,
    gate: f64,
) -> Vec<TrackedObject> {
    let (from, to) = (frame(prev_pose), frame(pose));
    let projected: Vec<Vec2> = prev.iter().map(|c| to.to_local_point(from.to_world_point(c.centroid))).collect();

    let mut pairs: Vec<(f64, usize, usize)> = current
        .iter()
        .enumerate()
        .flat_map(|(i, c)| projected.iter().enumerate().map(move |(j, p)| ((c.centroid - p).norm(), i, j)))
        .filter(|&(d, _, _)| d <= gate)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut matched: Vec<Option<usize>> = vec![None; current.len()];
    let mut taken = vec![false; prev.len()];
    for (_, i, j) in pairs {
        if matched[i].is_none() && !taken[j] {
            matched[i] = Some(j);
            taken[j] = true;
        }
    }

    current
        .iter()
        .zip(matched)
        .map(|(c, m)| {
            let velocity = m.map_or(Vec2::zeros(), |j| (c.centroid - projected[j]) / dt);
            TrackedObject {
                position: c.centroid,
                velocity,
                radius: c.radius,
                is_vehicle: velocity.norm() >= VEHICLE_SPEED_THRESHOLD,
            }
        })
        .collect()
}

/// Stateful per-vehicle wrapper around [`track`].
#[derive(Debug, Clone)]
pub struct Tracker {
    gate: f64,
    previous: Option<(Vec<Cluster>, Pose2D, f64)>,
}

impl Tracker {
    pub fn new(gate: f64) -> Self {
        Self { gate, previous: None }
    }

    pub fn update(&mut self, clusters: &[Cluster], pose: Pose2D, time: f64) -> Vec<TrackedObject> {
        let out = match &self.previous {
            Some((prev, prev_pose, t0)) if time > *t0 => track(prev, prev_pose, clusters, &pose, time - t0, self.gate),
            _ => track(&[], &pose, clusters, &pose, 1.0, self.gate),
        };
        self.previous = Some((clusters.to_vec(), pose, time));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(x: f64, y: f64) -> Cluster {
        Cluster { members: vec![0], centroid: Vec2::new(x, y), radius: 1.0 }
    }

    #[test]
    fn static_scene_under_ego_motion() {
        // world point (10, 5); ego moves and turns
        let p0 = Pose2D::new(0.0, 0.0, 0.0);
        let p1 = Pose2D::new(1.2, 0.3, 0.2);
        let world = Vec2::new(10.0, 5.0);
        let c0 = cluster(world.x, world.y);
        let local = frame(&p1).to_local_point(world);
        let c1 = cluster(local.x, local.y);
        let out = track(&[c0], &p0, &[c1], &p1, 0.5, 3.0);
        assert!(out[0].velocity.norm() < 1e-12);
        assert!(!out[0].is_vehicle);
    }

    #[test]
    fn translating_object_static_ego() {
        let p = Pose2D::new(0.0, 0.0, 0.0);
        let out = track(&[cluster(5.0, 2.0)], &p, &[cluster(5.5, 2.0)], &p, 0.5, 3.0);
        assert!((out[0].velocity - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!(out[0].is_vehicle);
    }

    #[test]
    fn slow_object_is_not_a_vehicle() {
        let p = Pose2D::new(0.0, 0.0, 0.0);
        let out = track(&[cluster(5.0, 2.0)], &p, &[cluster(5.2, 2.0)], &p, 0.5, 3.0);
        assert!((out[0].velocity.norm() - 0.4).abs() < 1e-12);
        assert!(!out[0].is_vehicle);
    }

    #[test]
    fn greedy_association_respects_gate() {
        let p = Pose2D::new(0.0, 0.0, 0.0);
        let prev = [cluster(0.0, 0.0), cluster(10.0, 0.0)];
        let cur = [cluster(10.4, 0.0), cluster(0.2, 0.0), cluster(-8.0, 0.0)];
        let out = track(&prev, &p, &cur, &p, 1.0, 3.0);
        assert!((out[0].velocity.x - 0.4).abs() < 1e-12);
        assert!((out[1].velocity.x - 0.2).abs() < 1e-12);
        assert_eq!(out[2].velocity, Vec2::zeros());
    }

    #[test]
    fn tracker_first_frame_is_static() {
        let mut t = Tracker::new(3.0);
        let p = Pose2D::new(0.0, 0.0, 0.0);
        assert_eq!(t.update(&[cluster(3.0, 0.0)], p, 0.0)[0].velocity, Vec2::zeros());
        let v = t.update(&[cluster(3.5, 0.0)], p, 0.5)[0].velocity;
        assert!((v.x - 1.0).abs() < 1e-12);
    }
}
