use serde::{Deserialize, Serialize};

use crate::coupling::ArbitratedCommand;
use crate::world::{wrap_angle, FactoryMap, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Actuator lag time constants, s.
    pub tau_v: f64,
    pub tau_omega: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Heading-tracking gain of the command adapter, 1/s.
    pub k_heading: f64,
    /// Bump response gain, 1/s.
    pub k_bump: f64,
    /// Decay time constant of the vertical channel after a bump, s.
    pub az_decay: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            tau_v: 0.15,
            tau_omega: 0.15,
            v_max: 0.3,
            omega_max: 1.0,
            k_heading: 2.0,
            k_bump: 40.0,
            az_decay: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub position: Vec2,
    pub heading: f64,
    /// Body speed, m/s.
    pub v: f64,
    pub omega: f64,
    /// Vertical disturbance at the extruder, m/s².
    pub a_z: f64,
    pub time: f64,
    /// Bump currently under the reference point.
    pub bump: Option<usize>,
}

impl PlantState {
    pub fn new(position: Vec2, heading: f64, v: f64) -> Self {
        PlantState { position, heading: wrap_angle(heading), v, omega: 0.0, a_z: 0.0, time: 0.0, bump: None }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.v
    }
}

/// Converts a planar acceleration into unicycle commands: the target
/// velocity one control period ahead sets speed and heading.
pub fn command_adapter(accel: [f64; 2], velocity: Vec2, heading: f64, dt: f64, params: &PlantParams) -> (f64, f64) {
    adapt(velocity + Vec2::new(accel[0], accel[1]) * dt, heading, f64::INFINITY, None, params)
}

/// Full adapter for an arbitrated command, including the speed cap, a
/// Turn yaw override and the lateral correction.
pub fn adapt_command(
    cmd: &ArbitratedCommand,
    velocity: Vec2,
    heading: f64,
    dt: f64,
    params: &PlantParams,
) -> (f64, f64) {
    let left = Vec2::from_angle(heading).perp();
    let target = velocity + Vec2::new(cmd.accel[0], cmd.accel[1]) * dt + left * cmd.lateral_velocity;
    adapt(target, heading, cmd.speed_cap, cmd.yaw_override, params)
}

fn adapt(target: Vec2, heading: f64, cap: f64, yaw_override: Option<f64>, params: &PlantParams) -> (f64, f64) {
    let speed = target.norm();
    let v_cmd = speed.min(cap).min(params.v_max).max(0.0);
    let omega = match yaw_override {
        Some(w) => w,
        None if speed < 0.005 => 0.0,
        None => params.k_heading * wrap_angle(target.angle() - heading),
    };
    (v_cmd, omega.clamp(-params.omega_max, params.omega_max))
}

/// Peak vertical disturbance while crossing `bump` at `speed`.
pub fn bump_response(k_bump: f64, height: f64, travel_extent: f64, speed: f64) -> f64 {
    k_bump * height * speed.abs() / travel_extent
}

/// Advances the plant one tick.
pub fn step_plant(
    plant: &PlantState,
    v_cmd: f64,
    omega_cmd: f64,
    map: &FactoryMap,
    dt: f64,
    params: &PlantParams,
) -> PlantState {
    let v_cmd = v_cmd.clamp(-params.v_max, params.v_max);
    let omega_cmd = omega_cmd.clamp(-params.omega_max, params.omega_max);
    let v = plant.v + (v_cmd - plant.v) * (dt / params.tau_v).min(1.0);
    let omega = plant.omega + (omega_cmd - plant.omega) * (dt / params.tau_omega).min(1.0);
    let mid = plant.heading + 0.5 * omega * dt;
    let position = plant.position + Vec2::from_angle(mid) * (v * dt);
    let heading = wrap_angle(plant.heading + omega * dt);
    let bump = map.bump_at(position);
    let a_z = match (bump, plant.bump) {
        (Some(i), _) => {
            let b = &map.bumps[i];
            bump_response(params.k_bump, b.height, 2.0 * b.half_length, v)
        }
        (None, Some(i)) => {
            // Leaving the footprint: the downward half of the impulse.
            let b = &map.bumps[i];
            -bump_response(params.k_bump, b.height, 2.0 * b.half_length, v)
        }
        (None, None) => plant.a_z * (-dt / params.az_decay).exp(),
    };
    PlantState { position, heading, v, omega, a_z, time: plant.time + dt, bump }
}
