//! Two-vessel encounter classification, COLREGs-compliant reference
//! directions, and the shaped training reward.
//!
//! Zones are defined relative to the other vessel (`rob`): the head-on zone
//! is a narrow sector dead ahead of it, the crossing zone its port-forward
//! sector. A vessel inside `rob`'s crossing zone has `rob` on its starboard
//! side and must give way.

use crate::error::{Error, Result};
use crate::geometry::{ccw_angle, cw_angle, Vec2};
use crate::perception::{Observation, VEHICLE_SPEED_THRESHOLD};
use crate::world::EventKind;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncounterClass {
    HeadOn,
    CrossingGiveWay,
    None,
}

/// Position and velocity of a vessel in any common planar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r_step: f64,
    pub r_collision: f64,
    pub r_goal: f64,
    pub colregs_scale: f64,
    /// Max distance at which an encounter is considered, m.
    pub zone_range: f64,
    /// Half-width of the head-on sector around rob's heading, rad.
    pub head_on_half_angle: f64,
    /// Port-side bearing interval (counterclockwise from rob's heading) of
    /// the crossing zone, rad.
    pub crossing_sector: [f64; 2],
    /// Relative heading |∠(V_rob, V_ego)| above which a head-on applies.
    pub head_on_heading: f64,
    /// Clockwise ∠(V_rob, V_ego) interval for a give-way crossing.
    pub crossing_heading: [f64; 2],
    /// Ego hull radius used for the passing clearance, m.
    pub ego_radius: f64,
    /// Passing clearance = factor · (ego radius + rob radius).
    pub clearance_factor: f64,
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_step > 0.0 || self.r_collision > 0.0 || self.r_goal <= 0.0 || self.colregs_scale < 0.0 {
            return Err(Error::Config("reward penalties must be ≤ 0 and r_goal > 0".into()));
        }
        Ok(())
    }
}

pub fn classify(ego: &Kinematics, rob: &Kinematics, cfg: &RewardConfig) -> EncounterClass {
    if ego.velocity.norm() < VEHICLE_SPEED_THRESHOLD || rob.velocity.norm() < VEHICLE_SPEED_THRESHOLD {
        return EncounterClass::None;
    }
    let offset = ego.position - rob.position;
    if offset.norm() > cfg.zone_range || offset.norm() == 0.0 {
        return EncounterClass::None;
    }
    let bearing = ccw_angle(rob.velocity, offset);
    if bearing.abs() <= cfg.head_on_half_angle && ccw_angle(rob.velocity, ego.velocity).abs() > cfg.head_on_heading {
        return EncounterClass::HeadOn;
    }
    let [lo, hi] = cfg.crossing_sector;
    let heading = cw_angle(rob.velocity, ego.velocity);
    if bearing > lo && bearing < hi && (cfg.crossing_heading[0]..=cfg.crossing_heading[1]).contains(&heading) {
        return EncounterClass::CrossingGiveWay;
    }
    EncounterClass::None
}

/// Unit direction the ego should steer along to comply with the encounter.
///
/// Head-on: toward a waypoint abeam of `rob` on its port side, so both
/// vessels alter course to starboard and pass port to port. Crossing: toward
/// a waypoint astern of `rob`.
pub fn compliant_velocity(
    ego: &Kinematics,
    rob: &Kinematics,
    rob_radius: f64,
    class: EncounterClass,
    cfg: &RewardConfig,
) -> Result<Vec2> {
    let heading = rob.velocity.try_normalize(0.0).ok_or(Error::ZeroVector)?;
    let clearance = cfg.clearance_factor * (cfg.ego_radius + rob_radius);
    let waypoint = match class {
        EncounterClass::HeadOn => rob.position + crate::geometry::rotate(heading, FRAC_PI_2) * clearance,
        EncounterClass::CrossingGiveWay => rob.position - heading * clearance,
        EncounterClass::None => return Err(Error::NoEncounter),
    };
    (waypoint - ego.position).try_normalize(0.0).ok_or(Error::ZeroVector)
}

/// `−scale · max(δ, 0)` with δ the clockwise angle from `v_ego` to
/// `v_compliant`.
pub fn colregs_penalty(v_ego: Vec2, v_compliant: Vec2, scale: f64) -> Result<f64> {
    if v_ego.norm() == 0.0 || v_compliant.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let delta = cw_angle(v_ego, v_compliant);
    Ok(-scale * delta.max(0.0))
}

/// The encounter the ego is in with its nearest perceived vehicle, with the
/// resulting penalty, or `None` outside any COLREGs situation.
pub fn colregs_state(obs: &Observation, cfg: &RewardConfig) -> Option<(EncounterClass, f64)> {
    let ego = Kinematics { position: Vec2::zeros(), velocity: obs.ego.velocity };
    let rob = obs.nearest_vehicle()?;
    let rob_k = Kinematics { position: rob.position, velocity: rob.velocity };
    let class = classify(&ego, &rob_k, cfg);
    if class == EncounterClass::None {
        return None;
    }
    let target = compliant_velocity(&ego, &rob_k, rob.radius, class, cfg).ok()?;
    let penalty = colregs_penalty(ego.velocity, target, cfg.colregs_scale).ok()?;
    Some((class, penalty))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub step: f64,
    pub forward: f64,
    pub colregs: f64,
    pub collision: f64,
    pub goal: f64,
    pub total: f64,
}

pub fn reward(prev: &Observation, next: &Observation, event: Option<EventKind>, cfg: &RewardConfig) -> RewardBreakdown {
    let step = cfg.r_step;
    let forward = prev.ego.goal.norm() - next.ego.goal.norm();
    let colregs = colregs_state(next, cfg).map_or(0.0, |(_, p)| p);
    let collision = if event == Some(EventKind::Collision) { cfg.r_collision } else { 0.0 };
    let goal = if event == Some(EventKind::GoalReached) { cfg.r_goal } else { 0.0 };
    RewardBreakdown { step, forward, colregs, collision, goal, total: step + forward + colregs + collision + goal }
}
