use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::NoiseStream;
use crate::behavior::{ProximityReading, SectorGeometry};
use crate::world::{ray_segment, wrap_angle, FactoryMap, Vec2};

/// Smallest reported range; keeps readings strictly positive.
const MIN_RANGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    /// Beam `i` points at `heading + i·2π/n`, counter-clockwise.
    pub ranges: Vec<f64>,
    pub max_range: f64,
}

impl LidarScan {
    /// Beam angle relative to the heading, in (−π, π].
    pub fn beam_angle(&self, i: usize) -> f64 {
        wrap_angle(i as f64 * TAU / self.ranges.len() as f64)
    }
}

/// Exact ray casting against obstacle edges and the map boundary.
pub fn raycast_lidar(position: Vec2, heading: f64, map: &FactoryMap, n_beams: usize, max_range: f64) -> LidarScan {
    let b = map.bounds;
    let walls = [
        (b.min, Vec2::new(b.max.x, b.min.y)),
        (Vec2::new(b.max.x, b.min.y), b.max),
        (b.max, Vec2::new(b.min.x, b.max.y)),
        (Vec2::new(b.min.x, b.max.y), b.min),
    ];
    let ranges = (0..n_beams)
        .map(|i| {
            let dir = Vec2::from_angle(heading + i as f64 * TAU / n_beams as f64);
            let hit_obstacle =
                map.obstacles.iter().filter_map(|o| o.ray_hit(position, dir)).fold(f64::INFINITY, f64::min);
            let hit_wall =
                walls.iter().filter_map(|(a, c)| ray_segment(position, dir, *a, *c)).fold(f64::INFINITY, f64::min);
            hit_obstacle.min(hit_wall).clamp(MIN_RANGE, max_range)
        })
        .collect();
    LidarScan { ranges, max_range }
}

/// Adds Gaussian range noise; draws one sample per beam whenever called.
pub fn add_range_noise(scan: &mut LidarScan, sigma: f64, stream: &mut NoiseStream) {
    for r in scan.ranges.iter_mut() {
        let n = stream.standard_normal();
        *r = (*r + sigma * n).clamp(MIN_RANGE, scan.max_range);
    }
}

/// Sector minima: front within ±front_half_angle, left and right out to
/// lateral_max_angle.
pub fn distance_processor(scan: &LidarScan, sectors: &SectorGeometry) -> ProximityReading {
    let mut out = ProximityReading { front: scan.max_range, left: scan.max_range, right: scan.max_range };
    for (i, &r) in scan.ranges.iter().enumerate() {
        let a = scan.beam_angle(i);
        let slot = if a.abs() <= sectors.front_half_angle {
            &mut out.front
        } else if a > 0.0 && a <= sectors.lateral_max_angle {
            &mut out.left
        } else if a < 0.0 && -a <= sectors.lateral_max_angle {
            &mut out.right
        } else {
            continue;
        };
        *slot = slot.min(r);
    }
    out
}
