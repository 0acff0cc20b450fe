use serde::{Deserialize, Serialize};

use super::parse::{CommandKind, GcodeCommand};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn distance(&self, o: &Point3) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2) + (self.z - o.z).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedMove {
    pub start_time: f64,
    pub duration: f64,
    pub from: Point3,
    pub to: Point3,
    /// Filament advanced during the move, mm (negative for retraction).
    pub extrude_delta: f64,
    pub layer_index: usize,
    pub source_line: usize,
    /// A programmed pause (M0/M1/M600) occurred since the previous move.
    pub after_pause: bool,
}

impl TimedMove {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn is_extruding(&self) -> bool {
        self.extrude_delta > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineOptions {
    /// Fixed dwell charged for each M109 temperature wait, s.
    pub m109_dwell: f64,
}

impl Default for TimelineOptions {
    fn default() -> Self {
        TimelineOptions { m109_dwell: 0.0 }
    }
}

/// Threads machine state through the command list and times every move.
///
/// Positions in the output are physical (G92 offsets removed), so a
/// re-zeroed axis still yields correct path lengths and bounding boxes.
pub fn build_timeline(commands: &[GcodeCommand], opts: &TimelineOptions) -> Result<Vec<TimedMove>> {
    let mut logical = [0.0f64; 3];
    let mut offset = [0.0f64; 3];
    let mut e_logical = 0.0f64;
    let mut feed_mm_s: Option<f64> = None;
    let mut absolute = true;
    let mut e_absolute = true;
    let mut pending_pause = false;
    let mut clock = 0.0f64;
    let mut out = Vec::new();

    let physical = |l: &[f64; 3], o: &[f64; 3]| Point3 { x: l[0] + o[0], y: l[1] + o[1], z: l[2] + o[2] };

    for cmd in commands {
        match &cmd.kind {
            CommandKind::Move(m) => {
                if let Some(f) = m.f {
                    if !(f > 0.0) {
                        return Err(Error::State {
                            line: cmd.source_line,
                            message: format!("feedrate must be positive, got F{f}"),
                        });
                    }
                    feed_mm_s = Some(f / 60.0);
                }
                let Some(feed) = feed_mm_s else {
                    return Err(Error::State {
                        line: cmd.source_line,
                        message: "move before any feedrate is known".into(),
                    });
                };
                let from = physical(&logical, &offset);
                for (axis, v) in [m.x, m.y, m.z].into_iter().enumerate() {
                    if let Some(v) = v {
                        logical[axis] = if absolute { v } else { logical[axis] + v };
                    }
                }
                let mut extrude = 0.0;
                if let Some(e) = m.e {
                    let target = if e_absolute { e } else { e_logical + e };
                    extrude = target - e_logical;
                    e_logical = target;
                }
                let to = physical(&logical, &offset);
                let length = from.distance(&to);
                if length == 0.0 && extrude == 0.0 {
                    continue;
                }
                let duration = if length > 0.0 { length / feed } else { 0.0 };
                out.push(TimedMove {
                    start_time: clock,
                    duration,
                    from,
                    to,
                    extrude_delta: extrude,
                    layer_index: 0,
                    source_line: cmd.source_line,
                    after_pause: std::mem::take(&mut pending_pause),
                });
                clock += duration;
            }
            CommandKind::SetTempWait { .. } if opts.m109_dwell > 0.0 => {
                let here = physical(&logical, &offset);
                out.push(TimedMove {
                    start_time: clock,
                    duration: opts.m109_dwell,
                    from: here,
                    to: here,
                    extrude_delta: 0.0,
                    layer_index: 0,
                    source_line: cmd.source_line,
                    after_pause: std::mem::take(&mut pending_pause),
                });
                clock += opts.m109_dwell;
            }
            CommandKind::Home => {
                logical = [0.0; 3];
                offset = [0.0; 3];
            }
            CommandKind::AbsoluteMode => {
                absolute = true;
                e_absolute = true;
            }
            CommandKind::RelativeMode => {
                absolute = false;
                e_absolute = false;
            }
            CommandKind::SetPosition(v) => {
                for (axis, val) in [v.x, v.y, v.z].into_iter().enumerate() {
                    if let Some(val) = val {
                        let phys = logical[axis] + offset[axis];
                        logical[axis] = val;
                        offset[axis] = phys - val;
                    }
                }
                if let Some(e) = v.e {
                    e_logical = e;
                }
            }
            CommandKind::Pause => pending_pause = true,
            CommandKind::Other(raw) => {
                let head = raw.split_whitespace().next().unwrap_or("").to_ascii_uppercase();
                match head.as_str() {
                    "M82" => e_absolute = true,
                    "M83" => e_absolute = false,
                    _ => {}
                }
            }
            CommandKind::SetTempNoWait { .. } | CommandKind::SetTempWait { .. } => {}
        }
    }
    Ok(out)
}

/// Assigns `layer_index` in place and returns the layer count.
///
/// A new layer opens at an extruding move whose z exceeds the previous
/// extruding move's z by at least `epsilon`; travel-only z changes never
/// open a layer.
pub fn segment_layers(timeline: &mut [TimedMove], epsilon: f64) -> usize {
    let mut layer = 0usize;
    let mut last_z: Option<f64> = None;
    for m in timeline.iter_mut() {
        if m.is_extruding() {
            if let Some(z0) = last_z {
                if m.to.z - z0 >= epsilon {
                    layer += 1;
                }
            }
            last_z = Some(m.to.z);
        }
        m.layer_index = layer;
    }
    layer + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintSegment {
    pub segment_index: usize,
    pub first_layer: usize,
    pub last_layer: usize,
    pub start_time: f64,
    pub end_time: f64,
}

/// Maximal runs of extrusion separated by programmed pause markers.
pub fn extract_print_segments(timeline: &[TimedMove]) -> Vec<PrintSegment> {
    let mut segments: Vec<PrintSegment> = Vec::new();
    let mut open: Option<PrintSegment> = None;
    let mut break_pending = false;
    for m in timeline {
        break_pending |= m.after_pause;
        if !m.is_extruding() {
            continue;
        }
        if break_pending {
            if let Some(seg) = open.take() {
                segments.push(seg);
            }
            break_pending = false;
        }
        match open.as_mut() {
            Some(seg) => {
                seg.last_layer = m.layer_index;
                seg.end_time = m.end_time();
            }
            None => {
                open = Some(PrintSegment {
                    segment_index: segments.len(),
                    first_layer: m.layer_index,
                    last_layer: m.layer_index,
                    start_time: m.start_time,
                    end_time: m.end_time(),
                });
            }
        }
    }
    segments.extend(open);
    segments
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalReason {
    FirstLayers,
    LastLayers,
    /// The segment has at most 2N layers, so its first and last N overlap.
    WholeSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub reason: CriticalReason,
    pub segment_index: usize,
}

impl CriticalInterval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

/// Wall-clock span of the extruding moves of `layers` inside a segment.
fn layer_span(
    timeline: &[TimedMove],
    seg: &PrintSegment,
    layers: std::ops::RangeInclusive<usize>,
) -> Option<(f64, f64)> {
    timeline
        .iter()
        .filter(|m| m.is_extruding() && layers.contains(&m.layer_index))
        .filter(|m| m.start_time >= seg.start_time && m.end_time() <= seg.end_time)
        .fold(None, |acc, m| match acc {
            None => Some((m.start_time, m.end_time())),
            Some((a, b)) => Some((a.min(m.start_time), b.max(m.end_time()))),
        })
}

/// First and last `n` layers of every segment, merged into one interval
/// when the segment has at most `2n` layers. Sorted by start time.
pub fn critical_intervals(segments: &[PrintSegment], timeline: &[TimedMove], n: usize) -> Vec<CriticalInterval> {
    assert!(n >= 1, "critical layer count must be >= 1");
    let mut out = Vec::new();
    for seg in segments {
        let count = seg.last_layer - seg.first_layer + 1;
        if count <= 2 * n {
            out.push(CriticalInterval {
                t_start: seg.start_time,
                t_end: seg.end_time,
                reason: CriticalReason::WholeSegment,
                segment_index: seg.segment_index,
            });
            continue;
        }
        let head = seg.first_layer..=seg.first_layer + n - 1;
        let tail = seg.last_layer + 1 - n..=seg.last_layer;
        for (range, reason) in [(head, CriticalReason::FirstLayers), (tail, CriticalReason::LastLayers)] {
            if let Some((a, b)) = layer_span(timeline, seg, range) {
                if b > a {
                    out.push(CriticalInterval { t_start: a, t_end: b, reason, segment_index: seg.segment_index });
                }
            }
        }
    }
    out.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    out
}
