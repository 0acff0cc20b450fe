//! Reactive detour behavior on top of the planner: frontal urgency modes
//! (Cruise, Slow, Turn) plus an independent lateral correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityReading {
    pub front: f64,
    pub left: f64,
    pub right: f64,
}

impl ProximityReading {
    pub fn validate(&self, max_range: f64) -> Result<()> {
        for (name, v) in [("front", self.front), ("left", self.left), ("right", self.right)] {
            if !(v > 0.0 && v <= max_range) {
                return Err(Error::validation(format!("proximity {name} = {v} outside (0, {max_range}]")));
            }
        }
        Ok(())
    }
}

/// Angular sectors used to reduce a scan, radians from the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    /// Front sector is `|θ| <= front_half_angle`.
    pub front_half_angle: f64,
    /// Lateral sectors span `front_half_angle < |θ| <= lateral_max_angle`.
    pub lateral_max_angle: f64,
}

impl Default for SectorGeometry {
    fn default() -> Self {
        SectorGeometry { front_half_angle: 30f64.to_radians(), lateral_max_angle: 90f64.to_radians() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorThresholds {
    pub d_slow: f64,
    pub d_turn: f64,
    pub d_side: f64,
    pub slow_speed: f64,
    pub turn_rate: f64,
    pub side_speed: f64,
    /// Speed cap in Cruise when a side correction is active.
    pub nominal_speed: f64,
    /// Extra clearance required before de-escalating a frontal mode.
    pub hysteresis: f64,
}

impl Default for BehaviorThresholds {
    fn default() -> Self {
        BehaviorThresholds {
            d_slow: 1.0,
            d_turn: 0.5,
            d_side: 0.4,
            slow_speed: 0.06,
            turn_rate: 0.5,
            side_speed: 0.05,
            nominal_speed: 0.12,
            hysteresis: 0.1,
        }
    }
}

impl BehaviorThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_turn > 0.0 && self.d_turn < self.d_slow) {
            return Err(Error::validation("behavior thresholds need 0 < d_turn < d_slow"));
        }
        if !(self.d_side > 0.0) {
            return Err(Error::validation("behavior d_side must be > 0"));
        }
        for (name, v) in [
            ("slow_speed", self.slow_speed),
            ("turn_rate", self.turn_rate),
            ("side_speed", self.side_speed),
            ("nominal_speed", self.nominal_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("behavior {name} must be > 0")));
            }
        }
        if !(self.hysteresis >= 0.0) {
            return Err(Error::validation("behavior hysteresis must be >= 0"));
        }
        Ok(())
    }
}

/// Ordered by urgency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontalMode {
    Cruise,
    Slow,
    Turn,
}

impl FrontalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrontalMode::Cruise => "cruise",
            FrontalMode::Slow => "slow",
            FrontalMode::Turn => "turn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideCorrection {
    None,
    ShiftLeft,
    ShiftRight,
}

impl SideCorrection {
    pub fn as_str(&self) -> &'static str {
        match self {
            SideCorrection::None => "none",
            SideCorrection::ShiftLeft => "shift_left",
            SideCorrection::ShiftRight => "shift_right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandOverride {
    /// Upper bound on forward speed, m/s.
    pub speed_cap: f64,
    /// Commanded yaw rate, rad/s (positive is counter-clockwise).
    pub yaw_rate: f64,
    /// Velocity along the body's left normal, m/s.
    pub lateral_velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDecision {
    pub frontal_mode: FrontalMode,
    pub side_correction: SideCorrection,
    pub command_override: Option<CommandOverride>,
}

fn raw_frontal(front: f64, th: &BehaviorThresholds) -> FrontalMode {
    if front <= th.d_turn {
        FrontalMode::Turn
    } else if front <= th.d_slow {
        FrontalMode::Slow
    } else {
        FrontalMode::Cruise
    }
}

fn side(reading: &ProximityReading, th: &BehaviorThresholds) -> SideCorrection {
    if reading.left <= th.d_side && reading.left <= reading.right {
        SideCorrection::ShiftRight
    } else if reading.right <= th.d_side && reading.right < reading.left {
        SideCorrection::ShiftLeft
    } else {
        SideCorrection::None
    }
}

/// Memoryless classification.
pub fn classify(reading: &ProximityReading, th: &BehaviorThresholds) -> BehaviorDecision {
    decide(raw_frontal(reading.front, th), reading, th)
}

fn decide(frontal_mode: FrontalMode, reading: &ProximityReading, th: &BehaviorThresholds) -> BehaviorDecision {
    let side_correction = side(reading, th);
    BehaviorDecision {
        frontal_mode,
        side_correction,
        command_override: mode_command(frontal_mode, side_correction, reading, th.nominal_speed, th),
    }
}

/// Override for a mode pair; `None` for plain Cruise.
pub fn mode_command(
    frontal: FrontalMode,
    side: SideCorrection,
    reading: &ProximityReading,
    nominal_speed: f64,
    th: &BehaviorThresholds,
) -> Option<CommandOverride> {
    let (speed_cap, yaw_rate) = match frontal {
        FrontalMode::Cruise if side == SideCorrection::None => return None,
        FrontalMode::Cruise => (nominal_speed, 0.0),
        FrontalMode::Slow => (th.slow_speed, 0.0),
        FrontalMode::Turn => {
            let sign = if reading.left >= reading.right { 1.0 } else { -1.0 };
            (0.0, sign * th.turn_rate)
        }
    };
    let lateral_velocity = match side {
        SideCorrection::None => 0.0,
        SideCorrection::ShiftLeft => th.side_speed,
        SideCorrection::ShiftRight => -th.side_speed,
    };
    Some(CommandOverride { speed_cap, yaw_rate, lateral_velocity })
}

/// Precedence token: frontal urgency orders overrides, lateral composes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Precedence {
    pub urgency: FrontalMode,
    pub lateral: bool,
}

impl Precedence {
    /// Plain Cruise: the planner's command passes through untouched.
    pub fn is_identity(&self) -> bool {
        self.urgency == FrontalMode::Cruise && !self.lateral
    }
}

pub fn arbitration_precedence(decision: &BehaviorDecision) -> Precedence {
    Precedence { urgency: decision.frontal_mode, lateral: decision.side_correction != SideCorrection::None }
}

/// Frontal-mode latch. Escalation is immediate; leaving a mode needs the
/// front range to clear that mode's threshold by the hysteresis band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BehaviorLatch {
    mode: Option<FrontalMode>,
}

impl BehaviorLatch {
    pub fn new() -> Self {
        BehaviorLatch::default()
    }

    pub fn mode(&self) -> FrontalMode {
        self.mode.unwrap_or(FrontalMode::Cruise)
    }

    pub fn update(&mut self, reading: &ProximityReading, th: &BehaviorThresholds) -> BehaviorDecision {
        let raw = raw_frontal(reading.front, th);
        let prev = self.mode();
        let h = th.hysteresis;
        let mode = if raw >= prev {
            raw
        } else if prev == FrontalMode::Turn && reading.front <= th.d_turn + h {
            FrontalMode::Turn
        } else if reading.front <= th.d_slow + h {
            FrontalMode::Slow
        } else {
            FrontalMode::Cruise
        };
        self.mode = Some(mode);
        decide(mode, reading, th)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(front: f64, left: f64, right: f64) -> ProximityReading {
        ProximityReading { front, left, right }
    }

    fn th() -> BehaviorThresholds {
        BehaviorThresholds::default()
    }

    #[test]
    fn documented_examples() {
        let d = classify(&r(3.0, 2.0, 2.0), &th());
        assert_eq!(
            (d.frontal_mode, d.side_correction, d.command_override),
            (FrontalMode::Cruise, SideCorrection::None, None)
        );
        assert_eq!(classify(&r(0.8, 2.0, 2.0), &th()).frontal_mode, FrontalMode::Slow);
        assert_eq!(classify(&r(0.3, 2.0, 2.0), &th()).frontal_mode, FrontalMode::Turn);

        let d = classify(&r(3.0, 0.2, 2.0), &th());
        assert_eq!(d.side_correction, SideCorrection::ShiftRight);
        let o = d.command_override.unwrap();
        assert_eq!((o.lateral_velocity, o.yaw_rate), (-0.05, 0.0));

        let d = classify(&r(0.3, 0.2, 2.0), &th());
        assert_eq!((d.frontal_mode, d.side_correction), (FrontalMode::Turn, SideCorrection::ShiftRight));
        let o = d.command_override.unwrap();
        assert_eq!((o.speed_cap, o.yaw_rate, o.lateral_velocity), (0.0, -0.5, -0.05));
    }

    #[test]
    fn mode_commands() {
        let o = mode_command(FrontalMode::Slow, SideCorrection::None, &r(0.8, 2.0, 2.0), 0.12, &th()).unwrap();
        assert_eq!(o.speed_cap, 0.06);
        let o = mode_command(FrontalMode::Turn, SideCorrection::None, &r(0.3, 2.0, 0.6), 0.12, &th()).unwrap();
        assert_eq!(o.yaw_rate, 0.5);
        let o = mode_command(FrontalMode::Turn, SideCorrection::None, &r(0.3, 1.0, 1.0), 0.12, &th()).unwrap();
        assert_eq!(o.yaw_rate, 0.5);
        let o = mode_command(FrontalMode::Slow, SideCorrection::ShiftLeft, &r(0.8, 2.0, 0.3), 0.12, &th()).unwrap();
        assert_eq!((o.speed_cap, o.lateral_velocity), (0.06, 0.05));
    }

    #[test]
    fn precedence_order() {
        assert!(FrontalMode::Turn > FrontalMode::Slow && FrontalMode::Slow > FrontalMode::Cruise);
        let p = arbitration_precedence(&classify(&r(3.0, 2.0, 2.0), &th()));
        assert!(p.is_identity());
        let p = arbitration_precedence(&classify(&r(0.8, 2.0, 0.3), &th()));
        assert_eq!(p, Precedence { urgency: FrontalMode::Slow, lateral: true });
    }

    /// Values inside each bucket plus the exact boundaries.
    fn front_buckets() -> Vec<(f64, FrontalMode)> {
        vec![
            (0.2, FrontalMode::Turn),
            (0.5, FrontalMode::Turn),
            (0.7, FrontalMode::Slow),
            (1.0, FrontalMode::Slow),
            (3.0, FrontalMode::Cruise),
        ]
    }

    #[test]
    fn exhaustive_bucket_table() {
        // Lateral buckets: near (≤ d_side), boundary, far; ties included.
        let lat = [0.2, 0.4, 2.0];
        for (front, fm) in front_buckets() {
            for &left in &lat {
                for &right in &lat {
                    let d = classify(&r(front, left, right), &th());
                    assert_eq!(d.frontal_mode, fm);
                    let expect_side = if left <= 0.4 && left <= right {
                        SideCorrection::ShiftRight
                    } else if right <= 0.4 && right < left {
                        SideCorrection::ShiftLeft
                    } else {
                        SideCorrection::None
                    };
                    assert_eq!(d.side_correction, expect_side, "front {front} left {left} right {right}");
                    match (fm, expect_side) {
                        (FrontalMode::Cruise, SideCorrection::None) => assert!(d.command_override.is_none()),
                        _ => {
                            let o = d.command_override.unwrap();
                            let cap = match fm {
                                FrontalMode::Cruise => 0.12,
                                FrontalMode::Slow => 0.06,
                                FrontalMode::Turn => 0.0,
                            };
                            assert_eq!(o.speed_cap, cap);
                            let yaw = match fm {
                                FrontalMode::Turn if left >= right => 0.5,
                                FrontalMode::Turn => -0.5,
                                _ => 0.0,
                            };
                            assert_eq!(o.yaw_rate, yaw);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn latch_holds_turn_until_clear() {
        let mut latch = BehaviorLatch::new();
        let t = th();
        assert_eq!(latch.update(&r(0.45, 2.0, 2.0), &t).frontal_mode, FrontalMode::Turn);
        assert_eq!(latch.update(&r(0.55, 2.0, 2.0), &t).frontal_mode, FrontalMode::Turn);
        assert_eq!(latch.update(&r(0.61, 2.0, 2.0), &t).frontal_mode, FrontalMode::Slow);
        assert_eq!(latch.update(&r(1.05, 2.0, 2.0), &t).frontal_mode, FrontalMode::Slow);
        assert_eq!(latch.update(&r(1.11, 2.0, 2.0), &t).frontal_mode, FrontalMode::Cruise);
        assert_eq!(latch.update(&r(2.0, 2.0, 2.0), &t).frontal_mode, FrontalMode::Cruise);
        assert_eq!(latch.update(&r(0.3, 2.0, 2.0), &t).frontal_mode, FrontalMode::Turn);
        assert_eq!(latch.update(&r(3.0, 2.0, 2.0), &t).frontal_mode, FrontalMode::Cruise);
    }

    proptest! {
        #[test]
        fn frontal_urgency_monotone(a in 0.01f64..5.0, b in 0.01f64..5.0, left in 0.01f64..5.0, right in 0.01f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let near = classify(&r(lo, left, right), &th());
            let far = classify(&r(hi, left, right), &th());
            prop_assert!(near.frontal_mode >= far.frontal_mode);
        }

        #[test]
        fn side_never_changes_yaw(front in 0.01f64..5.0, left in 0.01f64..5.0, right in 0.01f64..5.0) {
            let t = th();
            let reading = r(front, left, right);
            let d = classify(&reading, &t);
            let bare = mode_command(d.frontal_mode, SideCorrection::ShiftLeft, &reading, 0.12, &t).unwrap();
            let other = mode_command(d.frontal_mode, SideCorrection::ShiftRight, &reading, 0.12, &t).unwrap();
            prop_assert_eq!(bare.yaw_rate, other.yaw_rate);
            prop_assert_eq!(bare.speed_cap, other.speed_cap);
            if let Some(o) = d.command_override {
                prop_assert_eq!(o.yaw_rate, bare.yaw_rate);
            }
        }
    }
}
