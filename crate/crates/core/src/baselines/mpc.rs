use super::ego_state;
use crate::agents::{argmax, DiscreteActionTable};
use crate::colregs::{classify, compliant_velocity, EncounterClass, Kinematics, RewardConfig};
use crate::dynamics::{advance_control_step, GeneralizedForce, ThrustDelta, Timing, VesselParams};
use crate::episode::Policy;
use crate::error::{Error, Result};
use crate::geometry::{cw_angle, Vec2};
use crate::perception::Observation;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Prediction horizon in control steps.
    pub horizon: usize,
    /// Cost C of a predicted safety-distance violation.
    pub collision_cost: f64,
    /// Weight κ on the COLREGs term.
    pub colregs_weight: f64,
    /// Cost M of a COLREGs violation.
    pub colregs_cost: f64,
    /// Cost λ of a compliance-state flip.
    pub transition_cost: f64,
    pub effort_weight: f64,
    pub progress_weight: f64,
    /// Added to the sum of radii to form the safety distance, m.
    pub safety_margin: f64,
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let costs = [
            self.collision_cost,
            self.colregs_weight,
            self.colregs_cost,
            self.transition_cost,
            self.effort_weight,
            self.progress_weight,
            self.safety_margin,
        ];
        if self.horizon == 0 || costs.iter().any(|&c| c < 0.0) {
            return Err(Error::Config("mpc horizon must be ≥ 1 and costs ≥ 0".into()));
        }
        Ok(())
    }
}

/// Whether the ego velocity is on the compliant side (or no reference
/// direction exists).
fn compliant(ego: &Kinematics, rob: &Kinematics, radius: f64, class: EncounterClass, reward: &RewardConfig) -> bool {
    match compliant_velocity(ego, rob, radius, class, reward) {
        Ok(target) if ego.velocity.norm() > 0.0 => cw_angle(ego.velocity, target) <= 0.0,
        _ => true,
    }
}

/// Cost `H^k` of every joint discrete action held over the horizon.
pub fn mpc_costs(
    obs: &Observation,
    cfg: &MpcConfig,
    reward: &RewardConfig,
    vessel: &VesselParams,
    timing: Timing,
) -> Result<Vec<f64>> {
    let start = ego_state(obs);
    let ego0 = Kinematics { position: Vec2::zeros(), velocity: start.world_velocity() };
    let classes: Vec<EncounterClass> = obs
        .objects
        .iter()
        .map(|o| {
            let rob = Kinematics { position: o.position, velocity: o.velocity };
            if o.is_vehicle() {
                classify(&ego0, &rob, reward)
            } else {
                EncounterClass::None
            }
        })
        .collect();
    let flags0: Vec<bool> = obs
        .objects
        .iter()
        .zip(&classes)
        .map(|(o, &c)| {
            c == EncounterClass::None
                || compliant(&ego0, &Kinematics { position: o.position, velocity: o.velocity }, o.radius, c, reward)
        })
        .collect();
    let d_goal0 = obs.ego.goal.norm();
    let dt = timing.dt_control;

    let mut costs = Vec::with_capacity(DiscreteActionTable.len());
    for (_, delta) in DiscreteActionTable.iter() {
        let mut s = start;
        let mut flags = flags0.clone();
        let mut worst: f64 = 0.0;
        let mut effort = 0.0;
        let mut min_goal = d_goal0;
        for t in 1..=cfg.horizon {
            let next = advance_control_step(&s, delta, GeneralizedForce::ZERO, vessel, timing)?;
            effort +=
                ((next.thrusts.left - s.thrusts.left).abs() + (next.thrusts.right - s.thrusts.right).abs()) / 2000.0;
            s = next;
            let ego = Kinematics { position: s.position(), velocity: s.world_velocity() };
            min_goal = min_goal.min((obs.ego.goal - ego.position).norm());
            for (i, o) in obs.objects.iter().enumerate() {
                let rob = Kinematics { position: o.position + o.velocity * (dt * t as f64), velocity: o.velocity };
                let safety = vessel.hull_radius + o.radius + cfg.safety_margin;
                let r = ((ego.position - rob.position).norm() < safety) as u8 as f64;
                let (m, tr) = if classes[i] == EncounterClass::None {
                    (0.0, 0.0)
                } else {
                    let ok = compliant(&ego, &rob, o.radius, classes[i], reward);
                    let flipped = ok != flags[i];
                    flags[i] = ok;
                    ((!ok) as u8 as f64, flipped as u8 as f64)
                };
                let c = cfg.collision_cost * r + cfg.colregs_weight * cfg.colregs_cost * m + cfg.transition_cost * tr;
                worst = worst.max(c);
            }
        }
        costs.push(worst + cfg.effort_weight * effort - cfg.progress_weight * (d_goal0 - min_goal));
    }
    Ok(costs)
}

/// `argmin_k H^k`, lowest index on ties.
pub fn mpc_action(
    obs: &Observation,
    cfg: &MpcConfig,
    reward: &RewardConfig,
    vessel: &VesselParams,
    timing: Timing,
) -> Result<usize> {
    let costs = mpc_costs(obs, cfg, reward, vessel, timing)?;
    Ok(argmax(costs.iter().map(|c| -c)))
}

#[derive(Debug, Clone)]
pub struct MpcController {
    pub config: MpcConfig,
    pub reward: RewardConfig,
    pub vessel: VesselParams,
    pub timing: Timing,
}

impl Policy for MpcController {
    fn act(&mut self, obs: &Observation) -> ThrustDelta {
        match mpc_action(obs, &self.config, &self.reward, &self.vessel, self.timing) {
            Ok(i) => DiscreteActionTable.delta(i),
            Err(e) => {
                log::warn!("mpc: {e}; holding thrust");
                ThrustDelta::default()
            }
        }
    }
}
