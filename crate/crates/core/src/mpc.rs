//! Receding-horizon tracking controller on a planar double integrator.
//!
//! The QP is condensed: predicted states are eliminated through the
//! dynamics so the decision vector is the stacked inputs `u₀..u_{N−1}`.
//! Step `k` of the horizon means input `u_k` and the state `x_{k+1}` it
//! produces; constraints and the critical mask are indexed the same way.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcode::CriticalInterval;
use crate::qp::{QpProblem, QpSettings, QpSolver, QpStatus};
use crate::world::{closest_on_segment, Halfspace, Polytope, Vec2};

/// `(px, py, vx, vy)`.
pub type State4 = [f64; 4];

/// Exact zero-order-hold discretization of the planar double integrator.
pub fn build_dynamics(dt: f64) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let mut a = Matrix4::identity();
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let mut b = Matrix4x2::zeros();
    b[(0, 0)] = 0.5 * dt * dt;
    b[(1, 1)] = 0.5 * dt * dt;
    b[(2, 0)] = dt;
    b[(3, 1)] = dt;
    (a, b)
}

/// Propagates `x₀` through the dynamics; returns `N+1` states.
pub fn rollout(dt: f64, x0: &State4, inputs: &[[f64; 2]]) -> Vec<State4> {
    let (a, b) = build_dynamics(dt);
    let mut x = Vector4::from(*x0);
    let mut out = vec![*x0];
    for u in inputs {
        x = a * x + b * Vector2::from(*u);
        out.push(x.into());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Diagonal of Q over `(px, py, vx, vy)`.
    pub q_diag: [f64; 4],
    /// Diagonal of R over `(ax, ay)`.
    pub r_diag: [f64; 2],
    pub alpha_v: f64,
    pub alpha_u: f64,
    pub v_lim_critical: f64,
    pub v_max: f64,
    pub u_max: f64,
    pub obstacle_margin: f64,
    pub obstacle_range: f64,
    pub qp: QpSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 20,
            dt: 0.1,
            q_diag: [10.0, 10.0, 1.0, 1.0],
            r_diag: [0.1, 0.1],
            alpha_v: 1.0,
            alpha_u: 0.5,
            v_lim_critical: 0.06,
            v_max: 0.12,
            u_max: 0.5,
            obstacle_margin: 0.1,
            obstacle_range: 1.5,
            qp: QpSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::validation("controller.horizon must be >= 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("controller.dt must be > 0"));
        }
        if self.q_diag.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::validation("controller.q_diag must be >= 0 (Q PSD)"));
        }
        if self.r_diag.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::validation("controller.r_diag must be > 0 (R PD)"));
        }
        if !(self.alpha_v >= 0.0 && self.alpha_u >= 0.0) {
            return Err(Error::validation("controller.alpha_v and alpha_u must be >= 0"));
        }
        if !(self.v_lim_critical > 0.0 && self.v_lim_critical <= self.v_max) {
            return Err(Error::validation("controller.v_lim_critical must lie in (0, v_max]"));
        }
        if !(self.u_max > 0.0 && self.obstacle_margin >= 0.0 && self.obstacle_range > 0.0) {
            return Err(Error::validation("controller.u_max and obstacle_range must be > 0, obstacle_margin >= 0"));
        }
        self.qp.validate()
    }
}

/// Row normals of the inscribed regular octagon, one per opposite pair.
fn octagon_normals() -> [Vec2; 4] {
    use std::f64::consts::PI;
    std::array::from_fn(|j| Vec2::from_angle(PI / 8.0 + j as f64 * PI / 4.0))
}

/// Condensed QP plus the obstacle halfspaces it encodes.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub problem: QpProblem,
    /// `(k, h)`: the position of `x_{k+1}` must satisfy `h`.
    pub obstacle_halfspaces: Vec<(usize, Halfspace)>,
    pub zone_halfspaces: Vec<(usize, Halfspace)>,
}

/// Stacked prediction `X = Φx₀ + ΓU` for `x₁..x_N`.
fn prediction(dt: f64, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = build_dynamics(dt);
    let mut phi = DMatrix::zeros(4 * n, 4);
    let mut gamma = DMatrix::zeros(4 * n, 2 * n);
    let mut ak = Matrix4::identity();
    // powers[m] = A^m B
    let mut powers = Vec::with_capacity(n);
    for _ in 0..n {
        powers.push(ak * b);
        ak *= a;
    }
    let mut ai = a;
    for i in 0..n {
        phi.view_mut((4 * i, 0), (4, 4)).copy_from(&ai);
        ai *= a;
        for j in 0..=i {
            gamma.view_mut((4 * i, 2 * j), (4, 2)).copy_from(&powers[i - j]);
        }
    }
    (phi, gamma)
}

/// Builds the condensed QP for one control tick.
///
/// `reference[0]` corresponds to the current state and is not penalized;
/// `reference[k+1]` is the target for `x_{k+1}`.
#[allow(clippy::too_many_arguments)]
pub fn build_mpc_qp(
    current: &State4,
    reference: &[State4],
    obstacles: &[Polytope],
    critical_mask: &[bool],
    zones: &[Polytope],
    cfg: &MpcConfig,
    prev_input: [f64; 2],
) -> Result<MpcQp> {
    let n = cfg.horizon;
    if reference.len() != n + 1 || critical_mask.len() != n {
        return Err(Error::validation(format!(
            "mpc expects {} reference states and {n} mask entries, got {} and {}",
            n + 1,
            reference.len(),
            critical_mask.len()
        )));
    }
    let nu = 2 * n;
    let (phi, gamma) = prediction(cfg.dt, n);
    let x0 = DVector::from_column_slice(current);
    let mut r = DVector::zeros(4 * n);
    for k in 0..n {
        r.rows_mut(4 * k, 4).copy_from_slice(&reference[k + 1]);
    }
    let qbar = DVector::from_iterator(4 * n, (0..4 * n).map(|i| cfg.q_diag[i % 4]));

    // ½UᵀHU + gᵀU equals the cost up to a constant when H, g carry the factor 2.
    let qg = DMatrix::from_fn(4 * n, nu, |i, j| qbar[i] * gamma[(i, j)]);
    let mut h = gamma.transpose() * &qg;
    let free = &phi * &x0 - &r;
    let mut g = qg.transpose() * free;
    for k in 0..nu {
        h[(k, k)] += cfg.r_diag[k % 2];
    }
    let w_rate = cfg.alpha_u / (cfg.dt * cfg.dt);
    for (k, &crit) in critical_mask.iter().enumerate() {
        if !crit {
            continue;
        }
        for d in 0..2 {
            let i = 2 * k + d;
            h[(i, i)] += cfg.alpha_v + w_rate;
            if k == 0 {
                g[i] -= w_rate * prev_input[d];
            } else {
                let j = 2 * (k - 1) + d;
                h[(j, j)] += w_rate;
                h[(i, j)] -= w_rate;
                h[(j, i)] -= w_rate;
            }
        }
    }
    h *= 2.0;
    g *= 2.0;
    // Exact symmetry for the validator.
    let h = (&h + h.transpose()) * 0.5;

    let free_x = &phi * &x0;
    let mut rows: Vec<(DVector<f64>, f64, f64)> = Vec::new();
    for i in 0..nu {
        let mut a = DVector::zeros(nu);
        a[i] = 1.0;
        rows.push((a, -cfg.u_max, cfg.u_max));
    }
    // Linear functional c·p of a predicted position or velocity.
    let functional = |k: usize, off: usize, c: Vec2| -> (DVector<f64>, f64) {
        let row = gamma.row(4 * k + off).transpose() * c.x + gamma.row(4 * k + off + 1).transpose() * c.y;
        (row, c.x * free_x[4 * k + off] + c.y * free_x[4 * k + off + 1])
    };
    let normals = octagon_normals();
    let cos8 = (std::f64::consts::PI / 8.0).cos();
    for k in 0..n {
        let radius = if critical_mask[k] { cfg.v_lim_critical } else { cfg.v_max };
        let bound = radius * cos8;
        for nrm in normals {
            let (a, c) = functional(k, 2, nrm);
            rows.push((a, -bound - c, bound - c));
        }
    }
    let mut obstacle_halfspaces = Vec::new();
    for k in 0..n {
        let p = Vec2::new(reference[k + 1][0], reference[k + 1][1]);
        for (oi, obs) in obstacles.iter().enumerate() {
            let d = obs.distance(p);
            if d <= cfg.obstacle_margin {
                return Err(Error::ReferenceInsideObstacle { step: k + 1, obstacle: oi });
            }
            if d > cfg.obstacle_range {
                continue;
            }
            let hs = obs.separating_halfspace(p, cfg.obstacle_margin)?;
            let (a, c) = functional(k, 0, hs.normal);
            rows.push((a, f64::NEG_INFINITY, hs.offset - c));
            obstacle_halfspaces.push((k, hs));
        }
    }
    let mut zone_halfspaces = Vec::new();
    for k in (0..n).filter(|k| critical_mask[*k]) {
        let p = Vec2::new(reference[k + 1][0], reference[k + 1][1]);
        for zone in zones {
            // A reference inside the zone leaves nothing to separate; the
            // reference generator keeps critical references outside.
            let Ok(hs) = zone.separating_halfspace(p, 0.0) else {
                continue;
            };
            let (a, c) = functional(k, 0, hs.normal);
            rows.push((a, f64::NEG_INFINITY, hs.offset - c));
            zone_halfspaces.push((k, hs));
        }
    }

    let m = rows.len();
    let mut amat = DMatrix::zeros(m, nu);
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    for (i, (a, lo, hi)) in rows.into_iter().enumerate() {
        amat.row_mut(i).copy_from(&a.transpose());
        l[i] = lo;
        u[i] = hi;
    }
    Ok(MpcQp { problem: QpProblem::new(h, g, amat, l, u)?, obstacle_halfspaces, zone_halfspaces })
}

/// `mask[k]` is true iff `t_now + k·dt` lies in a critical interval.
pub fn critical_mask(t_now: f64, horizon: usize, dt: f64, criticals: &[CriticalInterval]) -> Vec<bool> {
    (0..horizon)
        .map(|k| {
            let t = t_now + k as f64 * dt;
            criticals.iter().any(|c| c.contains(t))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    pub states: Vec<State4>,
    pub inputs: Vec<[f64; 2]>,
    pub first_input: [f64; 2],
    pub status: QpStatus,
    pub iterations: usize,
    /// Wall-clock seconds; zero unless timing is enabled on the planner.
    pub solve_time: f64,
    /// The braking fallback replaced an infeasible solve.
    pub fallback: bool,
    pub critical_mask: Vec<bool>,
    pub obstacle_halfspaces: Vec<(usize, Halfspace)>,
    /// Largest deviation of `states` from re-propagating `inputs`.
    pub reconstruction_residual: f64,
}

impl PlannedTrajectory {
    /// Largest predicted speed over critical steps (0 if none).
    pub fn max_critical_speed(&self) -> f64 {
        self.critical_mask
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(k, _)| Vec2::new(self.states[k + 1][2], self.states[k + 1][3]).norm())
            .fold(0.0, f64::max)
    }

    /// Largest residual of an emitted obstacle halfspace (≤ 0 when satisfied).
    pub fn max_halfspace_residual(&self) -> f64 {
        self.obstacle_halfspaces
            .iter()
            .map(|(k, h)| h.residual(Vec2::new(self.states[k + 1][0], self.states[k + 1][1])))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_critical(&self) -> bool {
        self.critical_mask.first().copied().unwrap_or(false)
    }
}

/// Per-robot planner: owns the solver workspace and the warm start.
#[derive(Debug)]
pub struct MpcPlanner {
    cfg: MpcConfig,
    solver: QpSolver,
    last_inputs: Option<Vec<[f64; 2]>>,
    /// Condensed prediction matrices (Φ, Γ) for the configured horizon.
    condensed: (DMatrix<f64>, DMatrix<f64>),
    pub record_wall_time: bool,
    /// When set, failed solves append their problem dump here.
    pub failure_dumps: Option<Vec<String>>,
}

impl MpcPlanner {
    pub fn new(cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MpcPlanner {
            condensed: prediction(cfg.dt, cfg.horizon),
            cfg,
            solver: QpSolver::new(),
            last_inputs: None,
            record_wall_time: false,
            failure_dumps: None,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn reset(&mut self) {
        self.last_inputs = None;
        self.solver.clear_warm_start();
    }

    /// Solves one tick with the mask derived from print-clock time `t_now`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        current: &State4,
        reference: &[State4],
        obstacles: &[Polytope],
        zones: &[Polytope],
        t_now: f64,
        criticals: &[CriticalInterval],
        prev_input: [f64; 2],
    ) -> Result<PlannedTrajectory> {
        let mask = critical_mask(t_now, self.cfg.horizon, self.cfg.dt, criticals);
        self.solve_masked(current, reference, obstacles, zones, &mask, prev_input)
    }

    pub fn solve_masked(
        &mut self,
        current: &State4,
        reference: &[State4],
        obstacles: &[Polytope],
        zones: &[Polytope],
        mask: &[bool],
        prev_input: [f64; 2],
    ) -> Result<PlannedTrajectory> {
        let start = self.record_wall_time.then(Instant::now);
        let qp = build_mpc_qp(current, reference, obstacles, mask, zones, &self.cfg, prev_input)?;
        let n = self.cfg.horizon;
        if let Some(prev) = &self.last_inputs {
            let mut w = DVector::zeros(2 * n);
            for k in 0..n {
                let src = prev[(k + 1).min(n - 1)];
                w[2 * k] = src[0];
                w[2 * k + 1] = src[1];
            }
            self.solver.warm_start(w, None);
        }
        let sol = self.solver.solve(&qp.problem, &self.cfg.qp);
        if sol.status != QpStatus::Solved {
            if let Some(d) = self.failure_dumps.as_mut() {
                d.push(qp.problem.to_debug_text());
            }
        }
        let (inputs, fallback) = if sol.status == QpStatus::PrimalInfeasible {
            (self.braking(current), true)
        } else {
            ((0..n).map(|k| [sol.x[2 * k], sol.x[2 * k + 1]]).collect::<Vec<_>>(), false)
        };
        // States come from the condensed map the QP optimized over; the
        // residual then checks them against step-by-step propagation.
        let (phi, gamma) = &self.condensed;
        let u = DVector::from_iterator(2 * n, inputs.iter().flatten().copied());
        let stacked = phi * Vector4::from(*current) + gamma * u;
        let mut states = Vec::with_capacity(n + 1);
        states.push(*current);
        states.extend((0..n).map(|k| [stacked[4 * k], stacked[4 * k + 1], stacked[4 * k + 2], stacked[4 * k + 3]]));
        let reconstruction_residual = reconstruction_residual(self.cfg.dt, &states, &inputs);
        self.last_inputs = (!fallback).then(|| inputs.clone());
        Ok(PlannedTrajectory {
            first_input: inputs[0],
            states,
            inputs,
            status: sol.status,
            iterations: sol.iterations,
            solve_time: start.map_or(0.0, |s| s.elapsed().as_secs_f64()),
            fallback,
            critical_mask: mask.to_vec(),
            obstacle_halfspaces: qp.obstacle_halfspaces,
            reconstruction_residual,
        })
    }

    /// Decelerate toward rest as fast as the input bound allows.
    fn braking(&self, current: &State4) -> Vec<[f64; 2]> {
        let dt = self.cfg.dt;
        let mut v = Vec2::new(current[2], current[3]);
        (0..self.cfg.horizon)
            .map(|_| {
                let mut u = v * (-1.0 / dt);
                let norm = u.norm();
                if norm > self.cfg.u_max {
                    u = u * (self.cfg.u_max / norm);
                }
                v += u * dt;
                [u.x, u.y]
            })
            .collect()
    }
}

/// One-shot solve with a fresh planner.
#[allow(clippy::too_many_arguments)]
pub fn solve_mpc(
    current: &State4,
    reference: &[State4],
    obstacles: &[Polytope],
    zones: &[Polytope],
    t_now: f64,
    criticals: &[CriticalInterval],
    cfg: &MpcConfig,
    prev_input: [f64; 2],
) -> Result<PlannedTrajectory> {
    MpcPlanner::new(cfg.clone())?.solve(current, reference, obstacles, zones, t_now, criticals, prev_input)
}

/// Residual of `states[k+1] = A·states[k] + B·inputs[k]`, computed step by
/// step from the stored states.
pub fn reconstruction_residual(dt: f64, states: &[State4], inputs: &[[f64; 2]]) -> f64 {
    let (a, b) = build_dynamics(dt);
    inputs
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let pred = a * Vector4::from(states[k]) + b * Vector2::from(*u);
            (pred - Vector4::from(states[k + 1])).amax()
        })
        .fold(0.0, f64::max)
}

/// Piecewise-linear path parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: &[Vec2]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("a path needs at least 2 waypoints"));
        }
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = w[0].distance(w[1]);
            if !(d > 0.0) {
                return Err(Error::validation("consecutive waypoints must be distinct"));
            }
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Ok(Polyline { points: points.to_vec(), cumulative })
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    fn segment_of(&self, s: f64) -> usize {
        let i = self.cumulative.partition_point(|c| *c <= s);
        i.clamp(1, self.points.len() - 1) - 1
    }

    /// Position and unit tangent at arc length `s` (clamped to the path).
    pub fn sample(&self, s: f64) -> (Vec2, Vec2) {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_of(s);
        let a = self.points[i];
        let b = self.points[i + 1];
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let t = ((s - self.cumulative[i]) / len).clamp(0.0, 1.0);
        (a + (b - a) * t, (b - a) * (1.0 / len))
    }

    /// Arc length of the closest path point to `p` among `s ∈ [s_min, s_max]`.
    pub fn project(&self, p: Vec2, s_min: f64, s_max: f64) -> f64 {
        let s_min = s_min.clamp(0.0, self.length());
        let s_max = s_max.clamp(s_min, self.length());
        let mut best = (f64::INFINITY, s_min);
        for i in 0..self.points.len() - 1 {
            let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
            if c1 < s_min || c0 > s_max {
                continue;
            }
            let a = self.sample(c0.max(s_min)).0;
            let b = self.sample(c1.min(s_max)).0;
            let q = closest_on_segment(a, b, p);
            let d = q.distance(p);
            if d < best.0 {
                best = (d, c0.max(s_min) + q.distance(a));
            }
        }
        best.1
    }

    /// Arc-length intervals where the path lies inside a convex region.
    pub fn intervals_in(&self, region: &Polytope) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let d = self.points[i + 1] - a;
            // Cyrus-Beck clip of a + t·d, t ∈ [0, 1].
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            for h in region.halfspaces() {
                let den = h.normal.dot(d);
                let num = h.offset - h.normal.dot(a);
                if den == 0.0 {
                    if num < 0.0 {
                        t1 = -1.0;
                    }
                } else if den > 0.0 {
                    t1 = t1.min(num / den);
                } else {
                    t0 = t0.max(num / den);
                }
            }
            if t0 > t1 {
                continue;
            }
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let iv = (self.cumulative[i] + t0 * len, self.cumulative[i] + t1 * len);
            match out.last_mut() {
                Some(last) if (iv.0 - last.1).abs() < 1e-12 => last.1 = iv.1,
                _ => out.push(iv),
            }
        }
        out
    }

    /// Reference states at arc lengths `s`, with the given speeds along the
    /// tangent. Samples at the path end get zero velocity.
    pub fn states_at(&self, s: &[f64], speeds: &[f64]) -> Vec<State4> {
        let l = self.length();
        s.iter()
            .zip(speeds)
            .map(|(s, v)| {
                let (p, t) = self.sample(*s);
                let v = if *s >= l { 0.0 } else { *v };
                [p.x, p.y, t.x * v, t.y * v]
            })
            .collect()
    }
}

/// Constant-speed reference along the waypoint polyline, sampled at
/// `t_now + k·dt` for `k = 0..=horizon`.
pub fn reference_from_waypoints(
    waypoints: &[Vec2],
    v_cruise: f64,
    t_now: f64,
    horizon: usize,
    dt: f64,
) -> Result<Vec<State4>> {
    if !(v_cruise > 0.0) {
        return Err(Error::validation("v_cruise must be > 0"));
    }
    let path = Polyline::new(waypoints)?;
    let s: Vec<f64> = (0..=horizon).map(|k| (v_cruise * (t_now + k as f64 * dt)).min(path.length())).collect();
    Ok(path.states_at(&s, &vec![v_cruise; horizon + 1]))
}
