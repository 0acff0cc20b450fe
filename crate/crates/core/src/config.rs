//! Controller and simulator configuration as stored in scenario files.
//!
//! Every field has a default so a scenario only needs to list what it
//! changes. Both structs serialize back out in full, which is what the run
//! summary echoes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorThresholds, SectorGeometry};
use crate::coupling::CouplingConfig;
use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::qp::QpSettings;
use crate::sim::{Gains, LocalizationNoise, PlantParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrintMode {
    /// Case A: extrusion continues over bumps, only speed is reduced.
    Continuous,
    /// Case B: extrusion halts before each bump and resumes once settled.
    PauseResume,
}

impl PrintMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrintMode::Continuous => "continuous",
            PrintMode::PauseResume => "pause_resume",
        }
    }
}

impl std::str::FromStr for PrintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(PrintMode::Continuous),
            "pause_resume" => Ok(PrintMode::PauseResume),
            other => Err(Error::validation(format!("unknown mode {other:?} (expected continuous or pause_resume)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub horizon: usize,
    pub dt: f64,
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    pub alpha_v: f64,
    pub alpha_u: f64,
    pub v_lim_critical: f64,
    pub v_max: f64,
    pub u_max: f64,
    pub obstacle_margin: f64,
    /// Obstacles farther than this from a reference point emit no constraint.
    pub obstacle_range: f64,
    pub v_cruise: f64,
    /// First and last N layers of each print segment are critical.
    pub critical_layers: usize,
    pub layer_epsilon: f64,
    /// Print-clock lookahead over which the arbiter already applies the
    /// critical speed cap, so actuator lag settles before the window opens.
    pub critical_lookahead: f64,

    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub over_relaxation: f64,
    pub adapt_interval: usize,
    pub polish: bool,

    pub d_slow: f64,
    pub d_turn: f64,
    pub d_side: f64,
    pub slow_speed: f64,
    pub turn_rate: f64,
    pub side_speed: f64,
    pub hysteresis: f64,
    pub front_half_angle_deg: f64,
    pub lateral_max_angle_deg: f64,

    pub d_pause: f64,
    pub settle_vibration: f64,
    pub settle_time: f64,
    pub v_bump: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let mpc = MpcConfig::default();
        let qp = QpSettings::default();
        let th = BehaviorThresholds::default();
        let cp = CouplingConfig::default();
        ControllerConfig {
            horizon: mpc.horizon,
            dt: mpc.dt,
            q_diag: mpc.q_diag,
            r_diag: mpc.r_diag,
            alpha_v: mpc.alpha_v,
            alpha_u: mpc.alpha_u,
            v_lim_critical: mpc.v_lim_critical,
            v_max: mpc.v_max,
            u_max: mpc.u_max,
            obstacle_margin: mpc.obstacle_margin,
            obstacle_range: mpc.obstacle_range,
            v_cruise: 0.12,
            critical_layers: 3,
            layer_epsilon: 0.05,
            critical_lookahead: 1.5,
            eps_primal: qp.eps_primal,
            eps_dual: qp.eps_dual,
            max_iter: qp.max_iter,
            rho: qp.rho,
            over_relaxation: qp.alpha,
            adapt_interval: qp.adapt_interval,
            polish: qp.polish,
            d_slow: th.d_slow,
            d_turn: th.d_turn,
            d_side: th.d_side,
            slow_speed: th.slow_speed,
            turn_rate: th.turn_rate,
            side_speed: th.side_speed,
            hysteresis: th.hysteresis,
            front_half_angle_deg: 30.0,
            lateral_max_angle_deg: 90.0,
            d_pause: cp.d_pause,
            settle_vibration: cp.settle_vibration,
            settle_time: cp.settle_time,
            v_bump: cp.v_bump,
        }
    }
}

impl ControllerConfig {
    pub fn mpc(&self) -> MpcConfig {
        MpcConfig {
            horizon: self.horizon,
            dt: self.dt,
            q_diag: self.q_diag,
            r_diag: self.r_diag,
            alpha_v: self.alpha_v,
            alpha_u: self.alpha_u,
            v_lim_critical: self.v_lim_critical,
            v_max: self.v_max,
            u_max: self.u_max,
            obstacle_margin: self.obstacle_margin,
            obstacle_range: self.obstacle_range,
            qp: self.qp(),
        }
    }

    pub fn qp(&self) -> QpSettings {
        QpSettings {
            eps_primal: self.eps_primal,
            eps_dual: self.eps_dual,
            max_iter: self.max_iter,
            rho: self.rho,
            alpha: self.over_relaxation,
            adapt_interval: self.adapt_interval,
            polish: self.polish,
            ..QpSettings::default()
        }
    }

    pub fn behavior(&self) -> BehaviorThresholds {
        BehaviorThresholds {
            d_slow: self.d_slow,
            d_turn: self.d_turn,
            d_side: self.d_side,
            slow_speed: self.slow_speed,
            turn_rate: self.turn_rate,
            side_speed: self.side_speed,
            nominal_speed: self.v_cruise,
            hysteresis: self.hysteresis,
        }
    }

    pub fn sectors(&self) -> SectorGeometry {
        SectorGeometry {
            front_half_angle: self.front_half_angle_deg.to_radians(),
            lateral_max_angle: self.lateral_max_angle_deg.to_radians(),
        }
    }

    pub fn coupling(&self) -> CouplingConfig {
        CouplingConfig {
            d_pause: self.d_pause,
            settle_vibration: self.settle_vibration,
            settle_time: self.settle_time,
            v_bump: self.v_bump,
            v_lim_critical: self.v_lim_critical,
            v_max: self.v_max,
            critical_lookahead: self.critical_lookahead,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mpc().validate()?;
        self.behavior().validate()?;
        self.coupling().validate()?;
        if self.critical_layers < 1 {
            return Err(Error::validation("controller.critical_layers must be >= 1"));
        }
        if !(self.v_cruise > 0.0 && self.v_cruise <= self.v_max) {
            return Err(Error::validation("controller.v_cruise must lie in (0, v_max]"));
        }
        if !(self.layer_epsilon > 0.0) {
            return Err(Error::validation("controller.layer_epsilon must be > 0"));
        }
        if !(self.critical_lookahead >= 0.0) {
            return Err(Error::validation("controller.critical_lookahead must be >= 0"));
        }
        let s = self.sectors();
        if !(s.front_half_angle > 0.0
            && s.front_half_angle < s.lateral_max_angle
            && s.lateral_max_angle <= std::f64::consts::PI)
        {
            return Err(Error::validation("controller sector angles must satisfy 0 < front < lateral <= 180"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt_sim: f64,
    pub dt_ctrl: f64,
    pub t_max: f64,
    pub tau_v: f64,
    pub tau_omega: f64,
    pub v_max_plant: f64,
    pub omega_max: f64,
    pub k_heading: f64,
    pub k_bump: f64,
    pub az_decay: f64,
    pub lidar_beams: usize,
    pub lidar_max_range: f64,
    pub lidar_noise: f64,
    pub sigma_pos: f64,
    pub sigma_heading_deg: f64,
    pub sigma_vel: f64,
    pub goal_tolerance: f64,
    pub gains: Gains,
    /// Added to the nominal part dimensions before accumulated error, mm.
    pub baseline_error: [f64; 3],
    pub m109_dwell: f64,
    /// Record wall-clock solve times; off by default so logs stay
    /// reproducible byte for byte.
    pub record_wall_time: bool,
    /// Calibration file providing gains; resolved against the scenario
    /// directory and overriding `gains` when present.
    pub calibration: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let plant = PlantParams::default();
        let noise = LocalizationNoise::default();
        SimConfig {
            dt_sim: 0.02,
            dt_ctrl: 0.1,
            t_max: 600.0,
            tau_v: plant.tau_v,
            tau_omega: plant.tau_omega,
            v_max_plant: plant.v_max,
            omega_max: plant.omega_max,
            k_heading: plant.k_heading,
            k_bump: plant.k_bump,
            az_decay: plant.az_decay,
            lidar_beams: 360,
            lidar_max_range: 8.0,
            lidar_noise: 0.0,
            sigma_pos: noise.sigma_pos,
            sigma_heading_deg: noise.sigma_heading.to_degrees(),
            sigma_vel: noise.sigma_vel,
            goal_tolerance: 0.05,
            gains: Gains::default(),
            baseline_error: [0.0; 3],
            m109_dwell: 0.0,
            record_wall_time: false,
            calibration: None,
        }
    }
}

impl SimConfig {
    pub fn plant(&self) -> PlantParams {
        PlantParams {
            tau_v: self.tau_v,
            tau_omega: self.tau_omega,
            v_max: self.v_max_plant,
            omega_max: self.omega_max,
            k_heading: self.k_heading,
            k_bump: self.k_bump,
            az_decay: self.az_decay,
        }
    }

    pub fn noise(&self) -> LocalizationNoise {
        LocalizationNoise {
            sigma_pos: self.sigma_pos,
            sigma_heading: self.sigma_heading_deg.to_radians(),
            sigma_vel: self.sigma_vel,
        }
    }

    /// Sim ticks per control tick.
    pub fn control_ratio(&self) -> usize {
        (self.dt_ctrl / self.dt_sim).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_sim", self.dt_sim),
            ("dt_ctrl", self.dt_ctrl),
            ("t_max", self.t_max),
            ("tau_v", self.tau_v),
            ("tau_omega", self.tau_omega),
            ("v_max_plant", self.v_max_plant),
            ("omega_max", self.omega_max),
            ("k_heading", self.k_heading),
            ("az_decay", self.az_decay),
            ("lidar_max_range", self.lidar_max_range),
            ("goal_tolerance", self.goal_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("sim.{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("k_bump", self.k_bump),
            ("lidar_noise", self.lidar_noise),
            ("sigma_pos", self.sigma_pos),
            ("sigma_heading_deg", self.sigma_heading_deg),
            ("sigma_vel", self.sigma_vel),
            ("m109_dwell", self.m109_dwell),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("sim.{name} must be >= 0, got {v}")));
            }
        }
        if self.dt_ctrl < self.dt_sim {
            return Err(Error::validation("sim.dt_ctrl must be >= sim.dt_sim"));
        }
        let ratio = self.dt_ctrl / self.dt_sim;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::validation("sim.dt_ctrl must be an integer multiple of sim.dt_sim"));
        }
        if self.lidar_beams < 8 {
            return Err(Error::validation("sim.lidar_beams must be >= 8"));
        }
        Ok(())
    }
}
