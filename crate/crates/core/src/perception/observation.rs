use crate::dynamics::{ThrustPair, VesselState};
use crate::geometry::{Frame2, Vec2};
use serde::{Deserialize, Serialize};

pub const EGO_DIM: usize = 7;
pub const OBJECT_DIM: usize = 5;

/// Ego part of the observation, all in the ego body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub goal: Vec2,
    pub velocity: Vec2,
    pub yaw_rate: f64,
    pub thrusts: ThrustPair,
}

impl EgoState {
    /// `[p_x^goal, p_y^goal, v_x, v_y, w, T_left, T_right]`
    pub fn to_array(&self) -> [f64; EGO_DIM] {
        [
            self.goal.x,
            self.goal.y,
            self.velocity.x,
            self.velocity.y,
            self.yaw_rate,
            self.thrusts.left,
            self.thrusts.right,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

impl ObjectState {
    /// `[p_x, p_y, v_x, v_y, r]`
    pub fn to_array(&self) -> [f64; OBJECT_DIM] {
        [self.position.x, self.position.y, self.velocity.x, self.velocity.y, self.radius]
    }

    pub fn is_vehicle(&self) -> bool {
        self.velocity.norm() >= super::VEHICLE_SPEED_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ego: EgoState,
    /// Sorted by increasing distance, at most `max_objects` entries.
    pub objects: Vec<ObjectState>,
}

impl Observation {
    /// Fixed-width object slots with a validity mask; empty slots are zero.
    pub fn slots(&self, max_objects: usize) -> (Vec<[f64; OBJECT_DIM]>, Vec<bool>) {
        let mut rows = vec![[0.0; OBJECT_DIM]; max_objects];
        let mut mask = vec![false; max_objects];
        for (i, o) in self.objects.iter().take(max_objects).enumerate() {
            rows[i] = o.to_array();
            mask[i] = true;
        }
        (rows, mask)
    }

    /// Nearest perceived object moving at vehicle speed, if any.
    pub fn nearest_vehicle(&self) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.is_vehicle())
    }
}

/// Assembles the ego-frame observation. `objects` must already be in the
/// ego frame.
pub fn build_observation(
    ego: &VesselState,
    goal: Vec2,
    objects: impl IntoIterator<Item = ObjectState>,
    max_objects: usize,
) -> Observation {
    let frame = Frame2::new(ego.position(), ego.pose.yaw);
    let mut objects: Vec<ObjectState> = objects.into_iter().collect();
    objects.sort_by(|a, b| a.position.norm().total_cmp(&b.position.norm()));
    objects.truncate(max_objects);
    Observation {
        ego: EgoState {
            goal: frame.to_local_point(goal),
            velocity: ego.velocity.linear(),
            yaw_rate: ego.velocity.r,
            thrusts: ego.thrusts,
        },
        objects,
    }
}
