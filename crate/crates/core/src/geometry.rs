//! Planar geometry helpers shared by every module.
//!
//! World frame is z-up with yaw measured counterclockwise from +x. Body
//! frames are x-forward, y-port.

use nalgebra::Vector2;
use std::f64::consts::PI;

pub type Vec2 = Vector2<f64>;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return 2π for tiny negative inputs after rounding
    if a >= PI {
        a -= 2.0 * PI;
    }
    if a < -PI {
        a = -PI;
    }
    a
}

pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Signed counterclockwise angle from `from` to `to`, in `[-π, π)`.
pub fn ccw_angle(from: Vec2, to: Vec2) -> f64 {
    let cross = from.x * to.y - from.y * to.x;
    let dot = from.dot(&to);
    wrap_angle(cross.atan2(dot))
}

/// Signed clockwise angle from `from` to `to`, in `[-π, π)`.
pub fn cw_angle(from: Vec2, to: Vec2) -> f64 {
    wrap_angle(-ccw_angle(from, to))
}

pub fn heading_of(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

pub fn unit_from_heading(yaw: f64) -> Vec2 {
    Vec2::new(yaw.cos(), yaw.sin())
}

/// 2-D rigid transform (pose of a frame expressed in the world).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame2 {
    pub origin: Vec2,
    pub yaw: f64,
}

impl Frame2 {
    pub fn new(origin: Vec2, yaw: f64) -> Self {
        Self { origin, yaw }
    }

    pub fn to_local_point(&self, p: Vec2) -> Vec2 {
        rotate(p - self.origin, -self.yaw)
    }

    pub fn to_local_vector(&self, v: Vec2) -> Vec2 {
        rotate(v, -self.yaw)
    }

    pub fn to_world_point(&self, p: Vec2) -> Vec2 {
        rotate(p, self.yaw) + self.origin
    }

    pub fn to_world_vector(&self, v: Vec2) -> Vec2 {
        rotate(v, self.yaw)
    }
}
