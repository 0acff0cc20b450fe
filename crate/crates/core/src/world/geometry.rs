//! Planar primitives: vectors, halfspaces and convex polytopes in
//! halfspace form.
//!
//! A halfspace is the set `{p : normal·p <= offset}` with a unit normal. A
//! polytope is the intersection of at least three halfspaces; its vertex
//! list is enumerated once on construction and cached for distance queries.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMAL_TOL: f64 = 1e-9;
const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Rejects NaN and infinite components.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        let v = Vec2 { x, y };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::validation(format!("non-finite vector ({x}, {y})")))
        }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The set `{p : normal·p <= offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec2,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec2, offset: f64) -> Result<Self> {
        if !normal.is_finite() || !offset.is_finite() {
            return Err(Error::validation("non-finite halfspace"));
        }
        if (normal.norm() - 1.0).abs() > NORMAL_TOL {
            return Err(Error::validation(format!("halfspace normal {normal} is not unit length")));
        }
        Ok(Halfspace { normal, offset })
    }

    /// Signed residual `normal·p - offset`; positive means outside.
    pub fn residual(&self, p: Vec2) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.residual(p) <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Obstacle,
    RestrictedZone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    /// Counter-clockwise, enumerated once at construction.
    vertices: Vec<Vec2>,
    pub label: RegionKind,
}

impl Polytope {
    /// Builds a polytope from a convex vertex loop. Either winding is
    /// accepted; collinear or reflex corners are rejected.
    pub fn from_vertices(vertices: &[Vec2], label: RegionKind) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::validation(format!("polytope needs at least 3 vertices, got {}", vertices.len())));
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite vertex {v}")));
        }
        let mut verts = vertices.to_vec();
        if signed_area(&verts) < 0.0 {
            verts.reverse();
        }
        let n = verts.len();
        let mut halfspaces = Vec::with_capacity(n);
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(Error::validation(format!("polytope is not strictly convex at vertex {b}")));
            }
            let edge = b - a;
            let len = edge.norm();
            if len <= VERTEX_TOL {
                return Err(Error::validation(format!("repeated vertex {a}")));
            }
            let normal = Vec2::new(edge.y / len, -edge.x / len);
            halfspaces.push(Halfspace { normal, offset: normal.dot(a) });
        }
        // A locally convex loop can still wind twice around a point.
        let turn: f64 = (0..n)
            .map(|i| {
                let e0 = verts[(i + 1) % n] - verts[i];
                let e1 = verts[(i + 2) % n] - verts[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (turn - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::validation("polytope vertex loop self-intersects"));
        }
        Ok(Polytope { halfspaces, vertices: verts, label })
    }

    /// Builds a polytope from halfspaces, enumerating its vertices. Fails
    /// when the region is empty, degenerate or unbounded.
    pub fn from_halfspaces(halfspaces: Vec<Halfspace>, label: RegionKind) -> Result<Self> {
        if halfspaces.len() < 3 {
            return Err(Error::validation(format!("polytope needs at least 3 halfspaces, got {}", halfspaces.len())));
        }
        for h in &halfspaces {
            Halfspace::new(h.normal, h.offset)?;
        }
        // Bounded iff the normals positively span the plane: no angular gap
        // of π or more between consecutive normal directions.
        let mut angles: Vec<f64> = halfspaces.iter().map(|h| h.normal.angle()).collect();
        angles.sort_by(f64::total_cmp);
        let mut max_gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        if max_gap >= std::f64::consts::PI - 1e-12 {
            return Err(Error::validation("polytope is unbounded"));
        }

        let mut verts: Vec<Vec2> = Vec::new();
        for i in 0..halfspaces.len() {
            for j in (i + 1)..halfspaces.len() {
                let (hi, hj) = (halfspaces[i], halfspaces[j]);
                let det = hi.normal.cross(hj.normal);
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = Vec2::new(
                    (hi.offset * hj.normal.y - hj.offset * hi.normal.y) / det,
                    (hi.normal.x * hj.offset - hj.normal.x * hi.offset) / det,
                );
                if halfspaces.iter().all(|h| h.residual(p) <= VERTEX_TOL)
                    && !verts.iter().any(|v| v.distance(p) <= VERTEX_TOL)
                {
                    verts.push(p);
                }
            }
        }
        if verts.len() < 3 {
            return Err(Error::validation(format!("polytope is empty or degenerate ({} vertices)", verts.len())));
        }
        let centroid = verts.iter().fold(Vec2::ZERO, |acc, v| acc + *v) * (1.0 / verts.len() as f64);
        verts.sort_by(|a, b| (*a - centroid).angle().total_cmp(&(*b - centroid).angle()));
        if signed_area(&verts) <= VERTEX_TOL {
            return Err(Error::validation("polytope has zero area"));
        }
        Ok(Polytope { halfspaces, vertices: verts, label })
    }

    /// Axis-aligned rectangle helper.
    pub fn rectangle(min: Vec2, max: Vec2, label: RegionKind) -> Result<Self> {
        Polytope::from_vertices(&[min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)], label)
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Boundary counts as contained.
    pub fn contains(&self, p: Vec2) -> bool {
        self.halfspaces.iter().all(|h| h.residual(p) <= 0.0)
    }

    fn max_residual(&self, p: Vec2) -> f64 {
        self.halfspaces.iter().map(|h| h.residual(p)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Closest point on the boundary together with its Euclidean distance.
    pub fn closest_boundary_point(&self, p: Vec2) -> (Vec2, f64) {
        let n = self.vertices.len();
        let mut best = (self.vertices[0], f64::INFINITY);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let q = closest_on_segment(a, b, p);
            let d = q.distance(p);
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }

    /// Signed distance: Euclidean distance to the boundary when outside,
    /// and the largest (least negative) halfspace residual when inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        let r = self.max_residual(p);
        if r <= 0.0 {
            r
        } else {
            // The segment distance is mathematically >= r; taking the max
            // keeps the sign consistent with `contains` under rounding.
            self.closest_boundary_point(p).1.max(r)
        }
    }

    /// Halfspace that keeps `point` and excludes the polytope, with its
    /// boundary pushed `margin` away from the polytope. The returned normal
    /// points from `point` toward the polytope.
    pub fn separating_halfspace(&self, point: Vec2, margin: f64) -> Result<Halfspace> {
        if self.distance(point) <= 0.0 {
            return Err(Error::PointInsidePolytope);
        }
        let (closest, _) = self.closest_boundary_point(point);
        let outward = (point - closest).normalized().ok_or(Error::PointInsidePolytope)?;
        let normal = -outward;
        Ok(Halfspace { normal, offset: normal.dot(closest) - margin })
    }

    /// Segment intersection along a ray `origin + t·dir`, smallest t > 0.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let n = self.vertices.len();
        (0..n)
            .filter_map(|i| ray_segment(origin, dir, self.vertices[i], self.vertices[(i + 1) % n]))
            .min_by(f64::total_cmp)
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

pub(crate) fn closest_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Parameter t > 0 where the ray `origin + t·dir` meets segment `[a, b]`.
pub(crate) fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    (t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(t)
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [self.min, Vec2::new(self.max.x, self.min.y), self.max, Vec2::new(self.min.x, self.max.y)]
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Self {
        Rect { min: Vec2::new(a[0], a[1]), max: Vec2::new(a[2], a[3]) }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.min.x, r.min.y, r.max.x, r.max.y]
    }
}

/// Floor bump: an axis-aligned footprint, `half_length` along x (the
/// travel axis) and `width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec2,
    pub half_length: f64,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::validation("bump center is not finite"));
        }
        for (name, v) in [("height", self.height), ("half_length", self.half_length), ("width", self.width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("bump {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn footprint(&self) -> Rect {
        let h = Vec2::new(self.half_length, self.width / 2.0);
        Rect { min: self.center - h, max: self.center + h }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.footprint().contains(p)
    }
}
