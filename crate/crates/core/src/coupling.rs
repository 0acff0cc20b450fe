//! Print/motion coupling: speed policy near bumps and during critical
//! print windows, extrusion pause/resume around bumps, and arbitration of
//! planner commands against behavior overrides.

use serde::{Deserialize, Serialize};

use crate::behavior::{arbitration_precedence, BehaviorDecision, FrontalMode};
use crate::config::PrintMode;
use crate::error::{Error, Result};
use crate::gcode::CriticalInterval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Along-path distance before a bump at which extrusion pauses, m.
    pub d_pause: f64,
    /// Vertical vibration magnitude regarded as settled, m/s².
    pub settle_vibration: f64,
    /// Time the vibration must stay settled before resuming, s.
    pub settle_time: f64,
    pub v_bump: f64,
    pub v_lim_critical: f64,
    pub v_max: f64,
    /// Print-clock lookahead for the critical speed cap, s.
    pub critical_lookahead: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            d_pause: 0.15,
            settle_vibration: 0.02,
            settle_time: 1.0,
            v_bump: 0.06,
            v_lim_critical: 0.06,
            v_max: 0.12,
            critical_lookahead: 1.5,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_pause", self.d_pause),
            ("settle_vibration", self.settle_vibration),
            ("settle_time", self.settle_time),
            ("v_bump", self.v_bump),
            ("v_lim_critical", self.v_lim_critical),
            ("v_max", self.v_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("coupling {name} must be > 0, got {v}")));
            }
        }
        if !(self.critical_lookahead >= 0.0) {
            return Err(Error::validation("coupling critical_lookahead must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "factor", rename_all = "snake_case")]
pub enum PrintEventKind {
    PauseExtrusion,
    ResumeExtrusion,
    FeedScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintChannelEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: PrintEventKind,
    pub bump: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingState {
    /// Extrusion enabled.
    pub printing: bool,
    pub paused_for_bump: Option<usize>,
    pub settle_timer: f64,
    pub in_critical: bool,
}

impl Default for CouplingState {
    fn default() -> Self {
        CouplingState { printing: true, paused_for_bump: None, settle_timer: 0.0, in_critical: false }
    }
}

/// Where a bump sits relative to the robot along the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProximity {
    pub id: usize,
    /// Along-path distance to the bump's entry edge; 0 once reached.
    pub distance: f64,
    /// The robot's reference point is inside the footprint.
    pub inside: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CouplingInput<'a> {
    pub t: f64,
    pub dt: f64,
    /// Bumps not yet passed, plus any the robot is inside.
    pub bumps: &'a [BumpProximity],
    /// The G-code timeline still has work left.
    pub print_remaining: bool,
    /// Print-clock time.
    pub print_time: f64,
    pub criticals: &'a [CriticalInterval],
    /// Measured vertical vibration, m/s².
    pub vibration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOutput {
    pub speed_cap: f64,
    pub events: Vec<PrintChannelEvent>,
}

#[derive(Debug, Clone)]
pub struct CouplingController {
    cfg: CouplingConfig,
    mode: PrintMode,
    state: CouplingState,
}

impl CouplingController {
    pub fn new(cfg: CouplingConfig, mode: PrintMode) -> Result<Self> {
        cfg.validate()?;
        Ok(CouplingController { cfg, mode, state: CouplingState::default() })
    }

    pub fn state(&self) -> &CouplingState {
        &self.state
    }

    pub fn extruding_enabled(&self) -> bool {
        self.state.printing
    }

    /// Advances one tick: print-channel decisions and the speed cap.
    pub fn update(&mut self, inp: &CouplingInput<'_>) -> CouplingOutput {
        let cfg = &self.cfg;
        let near = inp
            .bumps
            .iter()
            .filter(|b| b.inside || b.distance <= cfg.d_pause)
            .min_by(|a, b| a.distance.total_cmp(&b.distance));
        let inside_any = inp.bumps.iter().any(|b| b.inside);
        let mut events = Vec::new();

        if self.mode == PrintMode::PauseResume {
            if self.state.printing {
                if let (Some(b), true) = (near, inp.print_remaining) {
                    self.state.printing = false;
                    self.state.paused_for_bump = Some(b.id);
                    self.state.settle_timer = 0.0;
                    events.push(PrintChannelEvent {
                        time: inp.t,
                        kind: PrintEventKind::PauseExtrusion,
                        bump: Some(b.id),
                    });
                }
            } else if near.is_some() {
                self.state.settle_timer = 0.0;
                if let Some(b) = near {
                    self.state.paused_for_bump = Some(b.id);
                }
            } else if inp.vibration.abs() <= cfg.settle_vibration {
                self.state.settle_timer += inp.dt;
                if self.state.settle_timer >= cfg.settle_time - 1e-9 {
                    events.push(PrintChannelEvent {
                        time: inp.t,
                        kind: PrintEventKind::ResumeExtrusion,
                        bump: self.state.paused_for_bump,
                    });
                    self.state.printing = true;
                    self.state.paused_for_bump = None;
                    self.state.settle_timer = 0.0;
                }
            } else {
                self.state.settle_timer = 0.0;
            }
        }

        let critical_now = inp.criticals.iter().any(|c| c.contains(inp.print_time));
        let critical_soon = inp
            .criticals
            .iter()
            .any(|c| c.t_end > inp.print_time && c.t_start <= inp.print_time + cfg.critical_lookahead);
        self.state.in_critical = critical_now;

        let mut speed_cap = cfg.v_max;
        if near.is_some() || inside_any || self.state.paused_for_bump.is_some() {
            speed_cap = speed_cap.min(cfg.v_bump);
        }
        if inp.print_remaining && (critical_now || critical_soon) {
            speed_cap = speed_cap.min(cfg.v_lim_critical);
        }
        CouplingOutput { speed_cap, events }
    }
}

/// Final command for one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitratedCommand {
    /// Planar acceleration from the planner.
    pub accel: [f64; 2],
    pub speed_cap: f64,
    /// Yaw rate imposed by a Turn override, replacing heading tracking.
    pub yaw_override: Option<f64>,
    /// Lateral velocity along the body's left normal.
    pub lateral_velocity: f64,
    pub from_behavior: bool,
}

/// Combines the planner's first input with the behavior decision and the
/// coupling speed cap. Overrides always win over the planner.
pub fn arbitrate(mpc_input: [f64; 2], decision: &BehaviorDecision, coupling_cap: f64) -> ArbitratedCommand {
    let prec = arbitration_precedence(decision);
    match decision.command_override {
        Some(o) if !prec.is_identity() => ArbitratedCommand {
            accel: mpc_input,
            speed_cap: coupling_cap.min(o.speed_cap),
            yaw_override: (prec.urgency == FrontalMode::Turn).then_some(o.yaw_rate),
            lateral_velocity: o.lateral_velocity,
            from_behavior: true,
        },
        _ => ArbitratedCommand {
            accel: mpc_input,
            speed_cap: coupling_cap,
            yaw_override: None,
            lateral_velocity: 0.0,
            from_behavior: false,
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub pause_count: usize,
    pub resume_count: usize,
    /// Σ (resume − pause), counting an open pause up to `end_time`.
    pub paused_duration: f64,
    /// Print-clock time lost; the clock is frozen while paused.
    pub extrusion_time_lost: f64,
    /// Stream ended while paused.
    pub open_pause: bool,
    pub intervals: Vec<(f64, f64)>,
}

/// Aggregates a pause/resume stream, checking order and alternation.
pub fn event_log_summary(events: &[PrintChannelEvent], end_time: f64) -> Result<EventSummary> {
    let mut s = EventSummary::default();
    let mut open: Option<f64> = None;
    let mut last_t = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        if e.time < last_t {
            return Err(Error::MalformedEventStream(format!("event {i} at t={} precedes t={last_t}", e.time)));
        }
        last_t = e.time;
        match (e.kind, open) {
            (PrintEventKind::PauseExtrusion, None) => {
                open = Some(e.time);
                s.pause_count += 1;
            }
            (PrintEventKind::ResumeExtrusion, Some(t0)) => {
                s.intervals.push((t0, e.time));
                s.paused_duration += e.time - t0;
                s.resume_count += 1;
                open = None;
            }
            (PrintEventKind::PauseExtrusion, Some(_)) => {
                return Err(Error::MalformedEventStream(format!("event {i}: pause while already paused")));
            }
            (PrintEventKind::ResumeExtrusion, None) => {
                return Err(Error::MalformedEventStream(format!("event {i}: resume without a pause")));
            }
            (PrintEventKind::FeedScale(_), _) => {}
        }
    }
    if let Some(t0) = open {
        let t1 = end_time.max(t0);
        s.intervals.push((t0, t1));
        s.paused_duration += t1 - t0;
        s.open_pause = true;
    }
    s.extrusion_time_lost = s.paused_duration;
    Ok(s)
}
