//! G-code processing: parse, time, split into layers and print segments,
//! and derive the motion-sensitive critical intervals.

mod parse;
mod timeline;

use std::path::Path;

pub use parse::{parse_gcode, AxisValues, CommandKind, GcodeCommand, Move};
pub use timeline::{
    build_timeline, critical_intervals, extract_print_segments, segment_layers, CriticalInterval, CriticalReason,
    Point3, PrintSegment, TimedMove, TimelineOptions,
};

use crate::error::{Error, Result};

/// A fully processed program: timed moves with layers assigned, segments
/// and critical intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct GcodeProgram {
    pub moves: Vec<TimedMove>,
    pub layer_count: usize,
    pub segments: Vec<PrintSegment>,
    pub criticals: Vec<CriticalInterval>,
}

impl GcodeProgram {
    pub fn from_text(text: &str, critical_layers: usize, layer_epsilon: f64, opts: &TimelineOptions) -> Result<Self> {
        let commands = parse_gcode(text)?;
        let mut moves = build_timeline(&commands, opts)?;
        if moves.is_empty() {
            return Err(Error::validation("g-code program contains no moves"));
        }
        let layer_count = segment_layers(&mut moves, layer_epsilon);
        let segments = extract_print_segments(&moves);
        let criticals = critical_intervals(&segments, &moves, critical_layers);
        Ok(GcodeProgram { moves, layer_count, segments, criticals })
    }

    pub fn load(
        path: impl AsRef<Path>,
        critical_layers: usize,
        layer_epsilon: f64,
        opts: &TimelineOptions,
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GcodeProgram::from_text(&text, critical_layers, layer_epsilon, opts).map_err(|e| match e {
            Error::Parse { line, message, .. } => {
                Error::Parse { source_name: path.display().to_string(), line, message }
            }
            other => other,
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.moves.last().map_or(0.0, TimedMove::end_time)
    }

    /// Sum of durations of extruding moves.
    pub fn extrusion_time(&self) -> f64 {
        self.moves.iter().filter(|m| m.is_extruding()).map(|m| m.duration).sum()
    }

    /// The move active at print-clock time `t` (half-open on the right).
    pub fn move_at(&self, t: f64) -> Option<&TimedMove> {
        let i = self.moves.partition_point(|m| m.start_time <= t);
        let m = self.moves.get(i.checked_sub(1)?)?;
        (t < m.end_time()).then_some(m)
    }

    /// True iff `t` lies within a move with positive extrusion.
    pub fn is_extruding(&self, t: f64) -> bool {
        self.move_at(t).is_some_and(TimedMove::is_extruding)
    }

    pub fn in_critical(&self, t: f64) -> bool {
        self.criticals.iter().any(|c| c.contains(t))
    }

    /// Part size from the extruding-move bounding box: X and Y extents and
    /// the top extruding z (the part rests on z = 0).
    pub fn nominal_dimensions(&self) -> [f64; 3] {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 3];
        for m in self.moves.iter().filter(|m| m.is_extruding()) {
            for p in [m.from, m.to] {
                lo[0] = lo[0].min(p.x);
                lo[1] = lo[1].min(p.y);
                hi[0] = hi[0].max(p.x);
                hi[1] = hi[1].max(p.y);
                hi[2] = hi[2].max(p.z);
            }
        }
        if !hi[2].is_finite() {
            return [0.0; 3];
        }
        [hi[0] - lo[0], hi[1] - lo[1], hi[2]]
    }
}
