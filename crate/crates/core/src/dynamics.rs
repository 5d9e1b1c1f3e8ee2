//! Three-DoF (surge, sway, yaw) vessel model under differential thrust.
//!
//! The model is `(M_RB + M_A) ν̇ + C_RB(ν) ν + N(ν) ν = τ + τ_dist` with a
//! diagonal added-mass matrix, the rigid-body Coriolis matrix for a hull
//! whose centre of gravity sits on the origin, and linear plus quadratic
//! damping per degree of freedom. Velocities are relative to still water.

use crate::error::{Error, Result};
use crate::geometry::{rotate, wrap_angle, Vec2};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const THRUST_MIN: f64 = -500.0;
pub const THRUST_MAX: f64 = 1000.0;
pub const THRUST_RATE_LIMIT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians, counterclockwise positive, kept in `[-π, π)`.
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Body-frame velocity ν: surge `u`, sway `v` (port positive), yaw rate `r`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl BodyVelocity {
    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.r)
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrustPair {
    pub left: f64,
    pub right: f64,
}

impl ThrustPair {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn clipped(self) -> Self {
        Self { left: self.left.clamp(THRUST_MIN, THRUST_MAX), right: self.right.clamp(THRUST_MIN, THRUST_MAX) }
    }
}

/// Commanded rate of change of each propeller's thrust, N/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrustDelta {
    pub left: f64,
    pub right: f64,
}

impl ThrustDelta {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn clipped(self) -> Self {
        Self {
            left: self.left.clamp(-THRUST_RATE_LIMIT, THRUST_RATE_LIMIT),
            right: self.right.clamp(-THRUST_RATE_LIMIT, THRUST_RATE_LIMIT),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.left, self.right]
    }
}

/// Generalized force in the body frame.
///
/// `yaw_moment` is positive when it turns the hull to starboard, i.e. it
/// drives the counterclockwise yaw rate negative. More left thrust than
/// right thrust gives a positive moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneralizedForce {
    pub surge: f64,
    pub sway: f64,
    pub yaw_moment: f64,
}

impl GeneralizedForce {
    pub const ZERO: Self = Self { surge: 0.0, sway: 0.0, yaw_moment: 0.0 };

    /// Force vector in the counterclockwise-positive body convention used
    /// by the integrator.
    fn as_ccw_vector(&self) -> Vector3<f64> {
        Vector3::new(self.surge, self.sway, -self.yaw_moment)
    }
}

impl std::ops::Add for GeneralizedForce {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { surge: self.surge + o.surge, sway: self.sway + o.sway, yaw_moment: self.yaw_moment + o.yaw_moment }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerDof {
    pub surge: f64,
    pub sway: f64,
    pub yaw: f64,
}

impl PerDof {
    fn as_array(&self) -> [f64; 3] {
        [self.surge, self.sway, self.yaw]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// Added-mass magnitudes (−X_u̇, −Y_v̇, −N_ṙ), all ≥ 0.
    pub added_mass: PerDof,
    pub linear_damping: PerDof,
    pub quadratic_damping: PerDof,
    /// Lateral offset of each thruster from the centreline, m.
    pub half_beam: f64,
    /// Radius of the collision circle, m.
    pub hull_radius: f64,
}

impl VesselParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = self
            .added_mass
            .as_array()
            .iter()
            .chain(self.linear_damping.as_array().iter())
            .chain(self.quadratic_damping.as_array().iter())
            .all(|&x| x >= 0.0 && x.is_finite());
        if !(self.mass > 0.0 && self.yaw_inertia > 0.0 && self.half_beam > 0.0 && self.hull_radius > 0.0)
            || !non_negative
        {
            return Err(Error::Config(format!("invalid vessel parameters: {self:?}")));
        }
        Ok(())
    }

    fn mass_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            self.mass + self.added_mass.surge,
            self.mass + self.added_mass.sway,
            self.yaw_inertia + self.added_mass.yaw,
        ))
    }

    fn coriolis(&self, nu: &BodyVelocity) -> Matrix3<f64> {
        let m = self.mass;
        Matrix3::new(
            0.0,
            0.0,
            -m * nu.v, //
            0.0,
            0.0,
            m * nu.u, //
            m * nu.v,
            -m * nu.u,
            0.0,
        )
    }

    fn damping(&self, nu: &BodyVelocity) -> Matrix3<f64> {
        let l = self.linear_damping;
        let q = self.quadratic_damping;
        Matrix3::from_diagonal(&Vector3::new(
            l.surge + q.surge * nu.u.abs(),
            l.sway + q.sway * nu.v.abs(),
            l.yaw + q.yaw * nu.r.abs(),
        ))
    }

    /// Kinetic energy ½ νᵀ(M_RB + M_A)ν.
    pub fn kinetic_energy(&self, nu: &BodyVelocity) -> f64 {
        let v = nu.as_vector();
        0.5 * v.dot(&(self.mass_matrix() * v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VesselState {
    pub pose: Pose2D,
    pub velocity: BodyVelocity,
    pub thrusts: ThrustPair,
}

impl VesselState {
    pub fn at_rest(pose: Pose2D) -> Self {
        Self { pose, ..Default::default() }
    }

    pub fn position(&self) -> Vec2 {
        self.pose.position()
    }

    /// Linear velocity rotated into the world frame.
    pub fn world_velocity(&self) -> Vec2 {
        rotate(self.velocity.linear(), self.pose.yaw)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.pose.x,
            self.pose.y,
            self.pose.yaw,
            self.velocity.u,
            self.velocity.v,
            self.velocity.r,
            self.thrusts.left,
            self.thrusts.right,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Physics and control step lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dt_physics: f64,
    pub dt_control: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self { dt_physics: 0.05, dt_control: 0.5 }
    }
}

impl Timing {
    pub fn substeps(&self) -> usize {
        (self.dt_control / self.dt_physics).round().max(1.0) as usize
    }
}

/// Bounded uniform random generalized force, resampled every control step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceModel {
    pub max_surge: f64,
    pub max_sway: f64,
    pub max_yaw_moment: f64,
}

impl DisturbanceModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GeneralizedForce {
        let draw = |rng: &mut R, bound: f64| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
        GeneralizedForce {
            surge: draw(rng, self.max_surge),
            sway: draw(rng, self.max_sway),
            yaw_moment: draw(rng, self.max_yaw_moment),
        }
    }
}

pub fn thrust_to_force(thrusts: ThrustPair, params: &VesselParams) -> GeneralizedForce {
    GeneralizedForce {
        surge: thrusts.left + thrusts.right,
        sway: 0.0,
        yaw_moment: (thrusts.left - thrusts.right) * params.half_beam,
    }
}

pub fn apply_thrust_delta(thrusts: ThrustPair, delta: ThrustDelta, dt_control: f64) -> ThrustPair {
    ThrustPair { left: thrusts.left + delta.left * dt_control, right: thrusts.right + delta.right * dt_control }
        .clipped()
}

/// Advances one physics step with a semi-implicit scheme: damping and
/// Coriolis matrices are frozen at the current velocity and applied to the
/// new one, then the pose is advanced with the updated velocity.
pub fn step_dynamics(
    state: &VesselState,
    force: GeneralizedForce,
    disturbance: GeneralizedForce,
    dt: f64,
    params: &VesselParams,
) -> Result<VesselState> {
    let nu = state.velocity;
    let mass = params.mass_matrix();
    let lhs = mass + (params.coriolis(&nu) + params.damping(&nu)) * dt;
    let rhs = mass * nu.as_vector() + (force + disturbance).as_ccw_vector() * dt;
    let next = lhs.lu().solve(&rhs).ok_or(Error::NonFiniteState { time: dt })?;
    let velocity = BodyVelocity { u: next[0], v: next[1], r: next[2] };

    let yaw = state.pose.yaw + velocity.r * dt;
    let displacement = rotate(velocity.linear(), yaw) * dt;
    let out = VesselState {
        pose: Pose2D::new(state.pose.x + displacement.x, state.pose.y + displacement.y, yaw),
        velocity,
        thrusts: state.thrusts,
    };
    if !out.is_finite() {
        return Err(Error::NonFiniteState { time: dt });
    }
    Ok(out)
}

/// Applies a thrust-rate command for one control step and integrates the
/// physics substeps with the resulting (held) thrusts.
pub fn advance_control_step(
    state: &VesselState,
    delta: ThrustDelta,
    disturbance: GeneralizedForce,
    params: &VesselParams,
    timing: Timing,
) -> Result<VesselState> {
    let mut s = *state;
    s.thrusts = apply_thrust_delta(s.thrusts, delta.clipped(), timing.dt_control);
    let force = thrust_to_force(s.thrusts, params);
    let dt = timing.dt_control / timing.substeps() as f64;
    for _ in 0..timing.substeps() {
        s = step_dynamics(&s, force, disturbance, dt, params)?;
    }
    Ok(s)
}

/// Steady-state surge speed under constant symmetric thrust.
pub fn terminal_speed(params: &VesselParams, thrusts: ThrustPair, dt: f64) -> Result<f64> {
    const HORIZON: f64 = 600.0;
    let window = (1.0 / dt).round() as usize;
    let force = thrust_to_force(thrusts.clipped(), params);
    let mut state = VesselState::default();
    let mut history = std::collections::VecDeque::with_capacity(window + 1);
    history.push_back(0.0);
    let steps = (HORIZON / dt).ceil() as usize;
    for _ in 0..steps {
        state = step_dynamics(&state, force, GeneralizedForce::ZERO, dt, params)?;
        history.push_back(state.velocity.u);
        if history.len() > window + 1 {
            history.pop_front();
        }
        if history.len() == window + 1 {
            let oldest = history[0];
            if (state.velocity.u - oldest).abs() < 1e-5 {
                return Ok(state.velocity.u);
            }
        }
    }
    Err(Error::NoConvergence(HORIZON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LabConfig;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> VesselParams {
        LabConfig::default().vessel
    }

    #[test]
    fn force_examples() {
        let p = params();
        let f = thrust_to_force(ThrustPair::new(500.0, 500.0), &p);
        assert_eq!((f.surge, f.sway, f.yaw_moment), (1000.0, 0.0, 0.0));
        let f = thrust_to_force(ThrustPair::new(1000.0, -500.0), &p);
        assert_eq!((f.surge, f.yaw_moment), (500.0, 1500.0));
        assert_eq!(thrust_to_force(ThrustPair::default(), &p), GeneralizedForce::ZERO);
    }

    #[test]
    fn more_left_thrust_turns_starboard() {
        let p = params();
        let mut s = VesselState { thrusts: ThrustPair::new(1000.0, 0.0), ..Default::default() };
        let f = thrust_to_force(s.thrusts, &p);
        for _ in 0..20 {
            s = step_dynamics(&s, f, GeneralizedForce::ZERO, 0.05, &p).unwrap();
        }
        assert!(s.velocity.r < 0.0);
        assert!(s.pose.yaw < 0.0);
    }

    #[test]
    fn delta_clipping_examples() {
        let t = apply_thrust_delta(ThrustPair::new(1000.0, 0.0), ThrustDelta::new(1000.0, 0.0), 0.5);
        assert_eq!(t, ThrustPair::new(1000.0, 0.0));
        let t = apply_thrust_delta(ThrustPair::new(-500.0, 0.0), ThrustDelta::new(-1000.0, 0.0), 0.5);
        assert_eq!(t.left, -500.0);
    }

    #[test]
    fn rest_is_equilibrium() {
        let p = params();
        let s = VesselState::default();
        let next = step_dynamics(&s, GeneralizedForce::ZERO, GeneralizedForce::ZERO, 0.05, &p).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn full_forward_thrust_rises_monotonically() {
        let p = params();
        let mut s = VesselState::default();
        let f = thrust_to_force(ThrustPair::new(1000.0, 1000.0), &p);
        let mut prev = 0.0;
        for _ in 0..2000 {
            s = step_dynamics(&s, f, GeneralizedForce::ZERO, 0.05, &p).unwrap();
            assert!(s.velocity.u >= prev);
            prev = s.velocity.u;
        }
        assert_abs_diff_eq!(prev, 3.3, epsilon = 0.2);
    }

    #[test]
    fn terminal_speed_zero_thrust() {
        assert_eq!(terminal_speed(&params(), ThrustPair::default(), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn terminal_speed_non_convergence() {
        let mut p = params();
        p.linear_damping.surge = 0.0;
        p.quadratic_damping.surge = 0.0;
        assert!(matches!(terminal_speed(&p, ThrustPair::new(1000.0, 1000.0), 0.05), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn halving_dt_converges_first_order() {
        let p = params();
        let start = VesselState {
            pose: Pose2D::new(0.0, 0.0, 0.3),
            velocity: BodyVelocity { u: 1.5, v: 0.2, r: 0.1 },
            thrusts: ThrustPair::new(900.0, 200.0),
        };
        let run = |dt: f64| {
            let f = thrust_to_force(start.thrusts, &p);
            let mut s = start;
            for _ in 0..((0.5 / dt).round() as usize) {
                s = step_dynamics(&s, f, GeneralizedForce::ZERO, dt, &p).unwrap();
            }
            s
        };
        let reference = run(0.5 / 4096.0);
        let err = |s: VesselState| {
            ((s.pose.x - reference.pose.x).powi(2)
                + (s.pose.y - reference.pose.y).powi(2)
                + (s.pose.yaw - reference.pose.yaw).powi(2)
                + (s.velocity.u - reference.velocity.u).powi(2)
                + (s.velocity.v - reference.velocity.v).powi(2)
                + (s.velocity.r - reference.velocity.r).powi(2))
            .sqrt()
        };
        let coarse = err(run(0.05));
        let fine = err(run(0.025));
        assert!(coarse / fine >= 1.8, "ratio {}", coarse / fine);
    }

    proptest! {
        #[test]
        fn thrusts_stay_clipped(deltas in proptest::collection::vec((-1000.0f64..1000.0, -1000.0f64..1000.0), 1..60)) {
            let mut t = ThrustPair::default();
            for (l, r) in deltas {
                t = apply_thrust_delta(t, ThrustDelta::new(l, r), 0.5);
                prop_assert!((THRUST_MIN..=THRUST_MAX).contains(&t.left));
                prop_assert!((THRUST_MIN..=THRUST_MAX).contains(&t.right));
            }
        }

        #[test]
        fn equal_thrust_goes_straight(thrust in -500.0f64..1000.0, yaw in -3.1f64..3.1, u0 in -2.0f64..3.0) {
            let p = params();
            let mut s = VesselState {
                pose: Pose2D::new(1.0, -2.0, yaw),
                velocity: BodyVelocity { u: u0, v: 0.0, r: 0.0 },
                thrusts: ThrustPair::new(thrust, thrust),
            };
            let f = thrust_to_force(s.thrusts, &p);
            let heading = Vec2::new(yaw.cos(), yaw.sin());
            let origin = s.position();
            for _ in 0..100 {
                s = step_dynamics(&s, f, GeneralizedForce::ZERO, 0.05, &p).unwrap();
                prop_assert_eq!(s.velocity.r, 0.0);
                let d = s.position() - origin;
                let cross = heading.x * d.y - heading.y * d.x;
                prop_assert!(cross.abs() < 1e-9);
            }
        }

        #[test]
        fn unforced_motion_loses_energy(u in -3.0f64..3.5, v in -1.0f64..1.0, r in -1.0f64..1.0) {
            let p = params();
            let mut s = VesselState { velocity: BodyVelocity { u, v, r }, ..Default::default() };
            let mut energy = p.kinetic_energy(&s.velocity);
            for _ in 0..200 {
                s = step_dynamics(&s, GeneralizedForce::ZERO, GeneralizedForce::ZERO, 0.05, &p).unwrap();
                let e = p.kinetic_energy(&s.velocity);
                prop_assert!(e <= energy * (1.0 + 1e-12) + 1e-15);
                energy = e;
            }
        }

        #[test]
        fn yaw_stays_wrapped(tl in -500.0f64..1000.0, tr in -500.0f64..1000.0) {
            let p = params();
            let mut s = VesselState { thrusts: ThrustPair::new(tl, tr), ..Default::default() };
            let f = thrust_to_force(s.thrusts, &p);
            for _ in 0..400 {
                s = step_dynamics(&s, f, GeneralizedForce::ZERO, 0.05, &p).unwrap();
                prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&s.pose.yaw));
            }
        }
    }
}
