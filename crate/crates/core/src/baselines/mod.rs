//! Non-learning controllers: an artificial potential field with COLREGs
//! virtual obstacles, and a scenario-enumeration model predictive controller.
//! Both read only the observation and the vessel model.

mod apf;
mod mpc;

pub use apf::{apf_action, apf_force, apf_potential, virtual_obstacles, ApfConfig, ApfController, PointObstacle};
pub use mpc::{mpc_action, mpc_costs, MpcConfig, MpcController};

use crate::agents::DiscreteActionTable;
use crate::dynamics::{advance_control_step, GeneralizedForce, Pose2D, Timing, VesselParams, VesselState};
use crate::error::Result;
use crate::perception::Observation;

/// The ego vessel reconstructed in its own frame at the decision time.
pub fn ego_state(obs: &Observation) -> VesselState {
    let mut s = VesselState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
    s.velocity.u = obs.ego.velocity.x;
    s.velocity.v = obs.ego.velocity.y;
    s.velocity.r = obs.ego.yaw_rate;
    s.thrusts = obs.ego.thrusts;
    s
}

/// Ego state after one control step under each joint discrete action.
pub fn one_step_outcomes(obs: &Observation, vessel: &VesselParams, timing: Timing) -> Result<Vec<VesselState>> {
    let s = ego_state(obs);
    DiscreteActionTable
        .iter()
        .map(|(_, d)| advance_control_step(&s, d, GeneralizedForce::ZERO, vessel, timing))
        .collect()
}
