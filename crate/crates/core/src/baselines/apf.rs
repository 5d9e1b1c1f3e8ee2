use super::one_step_outcomes;
use crate::agents::DiscreteActionTable;
use crate::colregs::{classify, EncounterClass, Kinematics, RewardConfig};
use crate::dynamics::{ThrustDelta, Timing, VesselParams};
use crate::episode::Policy;
use crate::error::{Error, Result};
use crate::geometry::{rotate, Vec2};
use crate::perception::Observation;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfConfig {
    pub k_att: f64,
    pub k_rep: f64,
    /// Influence distance of the repulsive potential, m.
    pub d0: f64,
    /// Extra distance beyond the vehicle radius at which virtual obstacles
    /// are placed, m.
    pub virtual_offset: f64,
    /// Upper bound of the commanded speed, m/s.
    pub max_speed: f64,
}

impl ApfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_att <= 0.0 || self.k_rep <= 0.0 || self.d0 <= 0.0 || self.max_speed <= 0.0 {
            return Err(Error::Config("apf gains, d0 and max_speed must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointObstacle {
    pub position: Vec2,
}

fn repulsion_terms(x: Vec2, o: Vec2, d0: f64) -> Result<Option<(f64, Vec2)>> {
    let diff = x - o;
    let d = diff.norm();
    if d == 0.0 {
        return Err(Error::Singularity);
    }
    Ok((d <= d0).then_some((d, diff)))
}

/// `U_att + Σ U_rep` at `x`.
pub fn apf_potential(x: Vec2, goal: Vec2, obstacles: &[PointObstacle], cfg: &ApfConfig) -> Result<f64> {
    let rho2 = (x - goal).norm_squared();
    let mut u = 0.5 * cfg.k_att * rho2;
    for o in obstacles {
        if let Some((d, _)) = repulsion_terms(x, o.position, cfg.d0)? {
            u += 0.5 * cfg.k_rep * (1.0 / d - 1.0 / cfg.d0).powi(2) * rho2;
        }
    }
    Ok(u)
}

/// `F = −∇U_att − Σ ∇U_rep` at `x`.
pub fn apf_force(x: Vec2, goal: Vec2, obstacles: &[PointObstacle], cfg: &ApfConfig) -> Result<Vec2> {
    let to_goal = x - goal;
    let rho2 = to_goal.norm_squared();
    let mut f = -cfg.k_att * to_goal;
    for o in obstacles {
        if let Some((d, diff)) = repulsion_terms(x, o.position, cfg.d0)? {
            let w = 1.0 / d - 1.0 / cfg.d0;
            let grad = -cfg.k_rep * w * rho2 * diff / d.powi(3) + cfg.k_rep * w * w * to_goal;
            f -= grad;
        }
    }
    Ok(f)
}

/// Virtual point obstacles that close off the COLREGs-violating passing
/// side of every perceived vehicle in a head-on or give-way geometry.
pub fn virtual_obstacles(obs: &Observation, cfg: &ApfConfig, reward: &RewardConfig) -> Vec<PointObstacle> {
    let ego = Kinematics { position: Vec2::zeros(), velocity: obs.ego.velocity };
    obs.objects
        .iter()
        .filter(|o| o.is_vehicle())
        .filter_map(|o| {
            let rob = Kinematics { position: o.position, velocity: o.velocity };
            let heading = o.velocity.normalize();
            let offset = o.radius + cfg.virtual_offset;
            match classify(&ego, &rob, reward) {
                EncounterClass::HeadOn => Some(o.position + rotate(heading, -FRAC_PI_2) * offset),
                EncounterClass::CrossingGiveWay => Some(o.position + heading * offset),
                EncounterClass::None => None,
            }
        })
        .map(|position| PointObstacle { position })
        .collect()
}

/// Joint discrete action whose next-step velocity best matches the
/// potential-field force rescaled to the speed envelope.
pub fn apf_action(
    obs: &Observation,
    cfg: &ApfConfig,
    reward: &RewardConfig,
    vessel: &VesselParams,
    timing: Timing,
) -> Result<usize> {
    let mut obstacles: Vec<PointObstacle> =
        obs.objects.iter().map(|o| PointObstacle { position: o.position }).collect();
    obstacles.extend(virtual_obstacles(obs, cfg, reward));
    let f = apf_force(Vec2::zeros(), obs.ego.goal, &obstacles, cfg)?;
    let target = match f.try_normalize(0.0) {
        Some(dir) => dir * (f.norm() / cfg.k_att).min(cfg.max_speed),
        None => Vec2::zeros(),
    };
    let outcomes = one_step_outcomes(obs, vessel, timing)?;
    let mut best = (0, f64::INFINITY);
    for (i, s) in outcomes.iter().enumerate() {
        let err = (s.world_velocity() - target).norm();
        if err < best.1 {
            best = (i, err);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone)]
pub struct ApfController {
    pub config: ApfConfig,
    pub reward: RewardConfig,
    pub vessel: VesselParams,
    pub timing: Timing,
}

impl Policy for ApfController {
    fn act(&mut self, obs: &Observation) -> ThrustDelta {
        match apf_action(obs, &self.config, &self.reward, &self.vessel, self.timing) {
            Ok(i) => DiscreteActionTable.delta(i),
            Err(e) => {
                log::warn!("apf: {e}; holding thrust");
                ThrustDelta::default()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LabConfig;

    fn cfg() -> ApfConfig {
        LabConfig::default().apf
    }

    #[test]
    fn zero_force_at_goal() {
        let g = Vec2::new(3.0, -2.0);
        assert_eq!(apf_force(g, g, &[], &cfg()).unwrap(), Vec2::zeros());
    }

    #[test]
    fn far_obstacle_is_pure_attraction() {
        let x = Vec2::new(1.0, 2.0);
        let g = Vec2::new(10.0, 0.0);
        let o = [PointObstacle { position: Vec2::new(1.0, 40.0) }];
        assert_eq!(apf_force(x, g, &o, &cfg()).unwrap(), -cfg().k_att * (x - g));
    }

    #[test]
    fn repulsion_vanishes_at_boundary() {
        let c = cfg();
        let x = Vec2::new(0.0, 0.0);
        let g = Vec2::new(10.0, 0.0);
        let o = [PointObstacle { position: Vec2::new(0.0, c.d0) }];
        assert_eq!(apf_force(x, g, &o, &c).unwrap(), apf_force(x, g, &[], &c).unwrap());
    }

    #[test]
    fn coincident_obstacle_is_singular() {
        let o = [PointObstacle { position: Vec2::zeros() }];
        assert!(matches!(apf_force(Vec2::zeros(), Vec2::new(1.0, 0.0), &o, &cfg()), Err(Error::Singularity)));
    }
}
