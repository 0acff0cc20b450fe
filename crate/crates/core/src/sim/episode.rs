use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::calibrate::Calibration;
use super::lidar::{add_range_noise, distance_processor, raycast_lidar};
use super::localize::{localize, NoiseStream};
use super::plant::{adapt_command, step_plant, PlantState};
use super::quality::{deposition_update, Gains, QualityState};
use crate::behavior::{BehaviorDecision, BehaviorLatch, CommandOverride, FrontalMode, SideCorrection};
use crate::config::{ControllerConfig, PrintMode, SimConfig};
use crate::coupling::{
    arbitrate, event_log_summary, BumpProximity, CouplingController, CouplingInput, EventSummary, PrintChannelEvent,
};
use crate::error::{Error, Result};
use crate::gcode::{GcodeProgram, TimelineOptions};
use crate::mpc::{MpcPlanner, Polyline, State4};
use crate::qp::QpStatus;
use crate::world::{Polytope, RegionKind, Scenario, Vec2};

/// One row of the trajectory log, per simulation tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
    pub a_z: f64,
    pub mode: FrontalMode,
    pub side: SideCorrection,
    pub extruding: bool,
    pub critical: bool,
    pub clearance_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventRecord {
    Behavior {
        t: f64,
        mode: FrontalMode,
        side: SideCorrection,
        command_override: Option<CommandOverride>,
    },
    Print {
        t: f64,
        #[serde(flatten)]
        event: PrintChannelEvent,
    },
    Solve {
        t: f64,
        print_time: f64,
        solve_time: f64,
        status: QpStatus,
        iterations: usize,
        critical: bool,
        fallback: bool,
    },
    Timeout {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub mode: PrintMode,
    /// Fully resolved configuration, so a run can be reproduced from its
    /// own summary.
    pub gcode: String,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub seed: u64,
    pub completed: bool,
    pub timed_out: bool,
    pub completion_time: f64,
    /// Print-clock time reached; equals the program duration when complete.
    pub print_time: f64,
    pub print_duration: f64,
    /// mm.
    pub nominal_dimensions: [f64; 3],
    pub final_dimensions: [f64; 3],
    /// `final − nominal`, mm.
    pub deviations: [f64; 3],
    pub disturbance_integral: f64,
    pub signed_integral: f64,
    pub min_obstacle_clearance: f64,
    pub print_events: EventSummary,
    pub solves: usize,
    pub solved: usize,
    pub max_iterations: usize,
    pub infeasible: usize,
    pub fallbacks: usize,
    /// Over Solved ticks only.
    pub max_planned_critical_speed: f64,
    /// Over Solved ticks only; ≤ 0 means every halfspace holds.
    pub max_halfspace_residual: f64,
    pub max_reconstruction_residual: f64,
    /// Largest true speed while the print clock is inside a critical window.
    pub max_critical_speed: f64,
    pub critical_speed_violations: usize,
    /// Ticks with material deposited while the robot is on a bump.
    pub bump_extrusion_violations: usize,
    pub calibration_id: Option<String>,
    pub noise_draws: u64,
    pub ticks: usize,
    /// SHA-256 of the trajectory CSV followed by the event JSON lines.
    pub log_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<EventRecord>,
    pub print_events: Vec<PrintChannelEvent>,
}

impl EpisodeResult {
    pub fn trajectory_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.ticks {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("trajectory.csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn events_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&serde_json::to_string(e)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    /// Writes `trajectory.csv`, `events.jsonl` and `summary.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("trajectory.csv", self.trajectory_csv()?),
            ("events.jsonl", self.events_jsonl()?),
            ("summary.json", self.summary_json()?),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Arc-length bookkeeping for the reference path, bumps and zones.
struct Course {
    path: Polyline,
    bump_spans: Vec<Option<(f64, f64)>>,
    zone_spans: Vec<(f64, f64)>,
}

impl Course {
    fn new(scenario: &Scenario) -> Result<Self> {
        let path = Polyline::new(&scenario.reference_path)?;
        let bump_spans = scenario
            .map
            .bumps
            .iter()
            .map(|b| {
                let f = b.footprint();
                let poly = Polytope::rectangle(f.min, f.max, RegionKind::RestrictedZone)?;
                let iv = path.intervals_in(&poly);
                Ok(iv.first().map(|a| (a.0, iv.last().unwrap().1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let zone_spans = scenario.map.zones.iter().flat_map(|z| path.intervals_in(z)).collect();
        Ok(Course { path, bump_spans, zone_spans })
    }

    fn proximity(&self, scenario: &Scenario, s_robot: f64, p: Vec2) -> Vec<BumpProximity> {
        let mut out = Vec::new();
        for (id, (bump, span)) in scenario.map.bumps.iter().zip(&self.bump_spans).enumerate() {
            let inside = bump.contains(p);
            let distance = match span {
                Some((_, b)) if s_robot > *b && !inside => continue,
                Some((a, _)) => (a - s_robot).max(0.0),
                None => {
                    let f = bump.footprint();
                    let dx = (f.min.x - p.x).max(p.x - f.max.x).max(0.0);
                    let dy = (f.min.y - p.y).max(p.y - f.max.y).max(0.0);
                    dx.hypot(dy)
                }
            };
            out.push(BumpProximity { id, distance, inside });
        }
        out
    }

    /// Reference from the robot's path position forward, slowing on
    /// critical steps and near bumps, and stopping short of restricted
    /// zones on critical steps.
    fn reference(&self, scenario: &Scenario, s0: f64, mask: &[bool], paused: bool) -> Vec<State4> {
        let c = &scenario.controller;
        let n = mask.len();
        let l = self.path.length();
        let mut s = vec![s0; n + 1];
        for k in 0..n {
            let mut v = c.v_cruise;
            if mask[k] {
                v = v.min(c.v_lim_critical);
            }
            if paused {
                v = v.min(c.v_bump);
            }
            for (a, b) in self.bump_spans.iter().flatten() {
                if s[k] >= a - c.d_pause && s[k] <= *b {
                    v = v.min(c.v_bump);
                }
            }
            let mut next = (s[k] + v * c.dt).min(l);
            if mask[k] {
                for (a, _) in self.zone_spans.iter().filter(|(a, _)| *a > s0) {
                    next = next.min(a - ZONE_GAP).max(s[k]);
                }
            }
            s[k + 1] = next;
        }
        let mut speeds: Vec<f64> = (0..n).map(|k| (s[k + 1] - s[k]) / c.dt).collect();
        speeds.push(if s[n] >= l { 0.0 } else { speeds[n - 1] });
        self.path.states_at(&s, &speeds)
    }
}

/// Distance kept to a restricted zone's entry while critical.
const ZONE_GAP: f64 = 0.05;

/// Loads the program and gains, then runs the closed loop.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeResult> {
    let program = load_program(scenario)?;
    let (gains, id) = match &scenario.sim.calibration {
        Some(p) => {
            let cal = Calibration::load(p)?;
            (cal.gains, Some(cal.id))
        }
        None => (scenario.sim.gains, None),
    };
    run_episode_with(scenario, &program, &gains, id)
}

pub fn load_program(scenario: &Scenario) -> Result<GcodeProgram> {
    GcodeProgram::load(
        &scenario.gcode_path,
        scenario.controller.critical_layers,
        scenario.controller.layer_epsilon,
        &TimelineOptions { m109_dwell: scenario.sim.m109_dwell },
    )
}

/// Fixed-step closed loop: localize, sense, decide, plan, arbitrate,
/// actuate, deposit. Controllers see only the noisy estimate.
pub fn run_episode_with(
    scenario: &Scenario,
    program: &GcodeProgram,
    gains: &Gains,
    calibration_id: Option<String>,
) -> Result<EpisodeResult> {
    scenario.validate()?;
    let sim = &scenario.sim;
    let ctrl = &scenario.controller;
    let map = &scenario.map;
    let params = sim.plant();
    let noise = sim.noise();
    let th = ctrl.behavior();
    let sectors = ctrl.sectors();
    let course = Course::new(scenario)?;
    let goal = scenario.goal();

    let mut planner = MpcPlanner::new(ctrl.mpc())?;
    planner.record_wall_time = sim.record_wall_time;
    let mut coupling = CouplingController::new(ctrl.coupling(), scenario.mode)?;
    let mut stream = NoiseStream::new(scenario.rng_seed);
    let mut latch = BehaviorLatch::new();
    let mut plant = PlantState::new(scenario.start.position, scenario.start.heading, scenario.start.velocity.norm());
    let mut quality = QualityState::default();

    let dt = sim.dt_sim;
    let ratio = sim.control_ratio();
    let max_ticks = (sim.t_max / dt).round() as usize;
    let total = program.total_duration();
    let criticals = &program.criticals;

    let mut t_print = 0.0;
    let mut s_robot = course.path.project(plant.position, 0.0, course.path.length());
    let mut prev_input = [0.0; 2];
    let mut decision = BehaviorDecision {
        frontal_mode: FrontalMode::Cruise,
        side_correction: SideCorrection::None,
        command_override: None,
    };
    let mut accel = [0.0; 2];
    let mut held = (0.0, 0.0);

    let mut ticks = Vec::with_capacity(max_ticks.min(1 << 20));
    let mut events = Vec::new();
    let mut print_events = Vec::new();
    let mut s = EpisodeSummary {
        mode: scenario.mode,
        gcode: scenario.gcode_path.display().to_string(),
        controller: scenario.controller.clone(),
        sim: scenario.sim.clone(),
        seed: scenario.rng_seed,
        completed: false,
        timed_out: false,
        completion_time: 0.0,
        print_time: 0.0,
        print_duration: total,
        nominal_dimensions: program.nominal_dimensions(),
        final_dimensions: [0.0; 3],
        deviations: [0.0; 3],
        disturbance_integral: 0.0,
        signed_integral: 0.0,
        min_obstacle_clearance: f64::INFINITY,
        print_events: EventSummary::default(),
        solves: 0,
        solved: 0,
        max_iterations: 0,
        infeasible: 0,
        fallbacks: 0,
        max_planned_critical_speed: 0.0,
        max_halfspace_residual: f64::NEG_INFINITY,
        max_reconstruction_residual: 0.0,
        max_critical_speed: 0.0,
        critical_speed_violations: 0,
        bump_extrusion_violations: 0,
        calibration_id,
        noise_draws: 0,
        ticks: 0,
        log_hash: String::new(),
    };

    let mut t = 0.0;
    for tick in 0..max_ticks {
        t = tick as f64 * dt;
        let est = localize(&plant, &noise, &mut stream);
        let window_end = s_robot + 0.5;
        s_robot = s_robot.max(course.path.project(est.position, s_robot - 0.05, window_end));
        let print_remaining = t_print < total;
        let bumps = course.proximity(scenario, s_robot, est.position);
        let out = coupling.update(&CouplingInput {
            t,
            dt,
            bumps: &bumps,
            print_remaining,
            print_time: t_print,
            criticals,
            vibration: plant.a_z,
        });
        for e in &out.events {
            print_events.push(*e);
            events.push(EventRecord::Print { t, event: *e });
        }

        if tick % ratio == 0 {
            let mut scan = raycast_lidar(plant.position, plant.heading, map, sim.lidar_beams, sim.lidar_max_range);
            if sim.lidar_noise > 0.0 {
                add_range_noise(&mut scan, sim.lidar_noise, &mut stream);
            }
            let reading = distance_processor(&scan, &sectors);
            decision = latch.update(&reading, &th);
            events.push(EventRecord::Behavior {
                t,
                mode: decision.frontal_mode,
                side: decision.side_correction,
                command_override: decision.command_override,
            });

            let mask: Vec<bool> = (0..ctrl.horizon)
                .map(|k| print_remaining && program.in_critical(t_print + k as f64 * ctrl.dt))
                .collect();
            let paused = coupling.state().paused_for_bump.is_some();
            let reference = course.reference(scenario, s_robot, &mask, paused);
            let plan =
                planner.solve_masked(&est.state4(), &reference, &map.obstacles, &map.zones, &mask, prev_input)?;
            s.solves += 1;
            match plan.status {
                QpStatus::Solved => {
                    s.solved += 1;
                    s.max_planned_critical_speed = s.max_planned_critical_speed.max(plan.max_critical_speed());
                    s.max_halfspace_residual = s.max_halfspace_residual.max(plan.max_halfspace_residual());
                }
                QpStatus::MaxIterations => s.max_iterations += 1,
                QpStatus::PrimalInfeasible => s.infeasible += 1,
            }
            s.fallbacks += plan.fallback as usize;
            s.max_reconstruction_residual = s.max_reconstruction_residual.max(plan.reconstruction_residual);
            events.push(EventRecord::Solve {
                t,
                print_time: t_print,
                solve_time: plan.solve_time,
                status: plan.status,
                iterations: plan.iterations,
                critical: plan.is_critical(),
                fallback: plan.fallback,
            });
            prev_input = plan.first_input;
            accel = plan.first_input;
            let cmd = arbitrate(accel, &decision, out.speed_cap);
            held = adapt_command(&cmd, est.velocity, est.heading, sim.dt_ctrl, &params);
        }

        // Zero-order hold, with this tick's cap re-applied.
        let cap = arbitrate(accel, &decision, out.speed_cap).speed_cap;
        plant = step_plant(&plant, held.0.min(cap), held.1, map, dt, &params);

        let enabled = coupling.extruding_enabled();
        let extruding = enabled && print_remaining && program.is_extruding(t_print);
        quality = deposition_update(&quality, extruding, plant.a_z, dt, gains);
        let critical_now = print_remaining && program.in_critical(t_print);
        if enabled && print_remaining {
            t_print = (t_print + dt).min(total);
        }

        let clearance = map.clearance(plant.position);
        s.min_obstacle_clearance = s.min_obstacle_clearance.min(clearance);
        if critical_now {
            s.max_critical_speed = s.max_critical_speed.max(plant.v.abs());
            if plant.v.abs() > ctrl.v_lim_critical + 1e-4 {
                s.critical_speed_violations += 1;
            }
        }
        if extruding && plant.bump.is_some() {
            s.bump_extrusion_violations += 1;
        }
        ticks.push(TickRecord {
            t: t + dt,
            x: plant.position.x,
            y: plant.position.y,
            heading: plant.heading,
            v: plant.v,
            omega: plant.omega,
            a_z: plant.a_z,
            mode: decision.frontal_mode,
            side: decision.side_correction,
            extruding,
            critical: critical_now,
            clearance_min: clearance,
        });
        if t_print >= total && plant.position.distance(goal) <= sim.goal_tolerance {
            s.completed = true;
            t += dt;
            break;
        }
    }
    if !s.completed {
        s.timed_out = true;
        t = max_ticks as f64 * dt;
        events.push(EventRecord::Timeout { t });
    }

    s.completion_time = t;
    s.print_time = t_print;
    s.ticks = ticks.len();
    s.noise_draws = stream.draws();
    s.disturbance_integral = quality.disturbance_integral;
    s.signed_integral = quality.signed_integral;
    for i in 0..3 {
        s.deviations[i] = sim.baseline_error[i] + quality.accumulated_error[i];
        s.final_dimensions[i] = s.nominal_dimensions[i] + s.deviations[i];
    }
    s.print_events = event_log_summary(&print_events, t)?;
    if s.max_halfspace_residual == f64::NEG_INFINITY {
        s.max_halfspace_residual = 0.0;
    }

    let mut result = EpisodeResult { summary: s, ticks, events, print_events };
    let mut hasher = Sha256::new();
    hasher.update(result.trajectory_csv()?.as_bytes());
    hasher.update(result.events_jsonl()?.as_bytes());
    result.summary.log_hash = hex(&hasher.finalize());
    Ok(result)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
