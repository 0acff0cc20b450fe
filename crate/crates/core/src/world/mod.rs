//! Factory environment: geometry primitives, the floor map and scenario
//! loading.

mod geometry;
mod scenario;

pub(crate) use geometry::{closest_on_segment, ray_segment};
pub use geometry::{Bump, Halfspace, Polytope, Rect, RegionKind, Vec2};
pub use scenario::{apply_override, load_scenario, load_scenario_with_overrides, Scenario};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = theta.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    if a <= -PI {
        a += TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Radians in (−π, π].
    pub heading: f64,
    pub time: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        RobotState { position, velocity: Vec2::ZERO, heading: wrap_angle(heading), time: 0.0 }
    }

    pub fn validate(&self, v_max: f64) -> Result<()> {
        if !self.position.is_finite() || !self.velocity.is_finite() || !self.heading.is_finite() {
            return Err(Error::validation("robot state has non-finite components"));
        }
        if !(self.time >= 0.0) {
            return Err(Error::validation("robot state time must be >= 0"));
        }
        if self.velocity.norm() > v_max + 1e-12 {
            return Err(Error::validation(format!("robot speed {} exceeds maximum {v_max}", self.velocity.norm())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoryMap {
    pub bounds: Rect,
    pub obstacles: Vec<Polytope>,
    pub zones: Vec<Polytope>,
    pub bumps: Vec<Bump>,
}

impl FactoryMap {
    pub fn validate(&self) -> Result<()> {
        let b = self.bounds;
        if !(b.min.is_finite() && b.max.is_finite() && b.min.x < b.max.x && b.min.y < b.max.y) {
            return Err(Error::validation(format!("invalid map bounds {:?}", <[f64; 4]>::from(b))));
        }
        for (kind, list) in [("obstacle", &self.obstacles), ("zone", &self.zones)] {
            for (i, p) in list.iter().enumerate() {
                if let Some(v) = p.vertices().iter().find(|v| !b.contains(**v)) {
                    return Err(Error::validation(format!("{kind} {i} vertex {v} lies outside the map bounds")));
                }
            }
        }
        for (i, bump) in self.bumps.iter().enumerate() {
            bump.validate().map_err(|e| Error::validation(format!("bump {i}: {e}")))?;
            if !bump.footprint().corners().iter().all(|c| b.contains(*c)) {
                return Err(Error::validation(format!("bump {i} footprint leaves the map bounds")));
            }
        }
        Ok(())
    }

    /// Index of the first obstacle containing `p`.
    pub fn obstacle_at(&self, p: Vec2) -> Option<usize> {
        self.obstacles.iter().position(|o| o.contains(p))
    }

    /// Smallest signed distance from `p` to any obstacle (∞ when none).
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles.iter().map(|o| o.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn bump_at(&self, p: Vec2) -> Option<usize> {
        self.bumps.iter().position(|b| b.contains(p))
    }
}
