//! Dense convex QP solver:
//!
//! ```text
//! minimize    ½ xᵀHx + gᵀx
//! subject to  l <= Ax <= u
//! ```
//!
//! Operator splitting (ADMM) in the OSQP form: each iteration solves one
//! linear system with the cached Cholesky factor of `H + σI + ρAᵀA`,
//! projects onto the box `[l, u]` and takes a scaled dual step. The penalty
//! ρ is rebalanced from the residual ratio every `adapt_interval`
//! iterations. Once the iterate is close, an active-set polish solves the
//! reduced KKT system exactly and is kept only if it certifies.
//!
//! Equalities are rows with `l == u`; missing bounds are ±∞.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// Largest bound violation of `Ax`.
    pub primal: f64,
    /// `‖Hx + g + Aᵀy‖∞`.
    pub dual: f64,
    /// Largest `|y_i|` times the slack to the bound it pushes against;
    /// also catches duals of the wrong sign.
    pub complementarity: f64,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>, a: DMatrix<f64>, l: DVector<f64>, u: DVector<f64>) -> Result<Self> {
        let p = QpProblem { h, g, a, l, u };
        p.validate(cfg!(debug_assertions))?;
        Ok(p)
    }

    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        let n = g.len();
        QpProblem::new(h, g, DMatrix::zeros(0, n), DVector::zeros(0), DVector::zeros(0))
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self, check_psd: bool) -> Result<()> {
        let n = self.n();
        let m = self.m();
        if self.h.shape() != (n, n) || self.a.shape() != (m, n) || self.u.len() != m {
            return Err(Error::validation(format!(
                "qp dimension mismatch: H {:?}, g {}, A {:?}, l {}, u {}",
                self.h.shape(),
                n,
                self.a.shape(),
                m,
                self.u.len()
            )));
        }
        if self.h.iter().chain(self.g.iter()).chain(self.a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("qp data contains non-finite entries"));
        }
        for i in 0..n {
            for j in 0..i {
                if (self.h[(i, j)] - self.h[(j, i)]).abs() > 1e-9 {
                    return Err(Error::validation(format!("H is not symmetric at ({i}, {j})")));
                }
            }
        }
        for i in 0..m {
            if self.l[i].is_nan() || self.u[i].is_nan() || self.l[i] > self.u[i] {
                return Err(Error::validation(format!("constraint {i} has l = {} > u = {}", self.l[i], self.u[i])));
            }
        }
        if check_psd && n > 0 {
            let min_eig = self.h.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-8 {
                return Err(Error::validation(format!("H is not PSD (smallest eigenvalue {min_eig:.3e})")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub fn kkt_residuals(&self, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
        let ax = &self.a * x;
        let mut primal = 0.0f64;
        let mut comp = 0.0f64;
        for i in 0..self.m() {
            primal = primal.max(self.l[i] - ax[i]).max(ax[i] - self.u[i]);
            let yi = y[i];
            let c = if yi > 0.0 {
                if self.u[i].is_finite() {
                    yi * (self.u[i] - ax[i]).abs()
                } else {
                    yi
                }
            } else if yi < 0.0 {
                if self.l[i].is_finite() {
                    -yi * (ax[i] - self.l[i]).abs()
                } else {
                    -yi
                }
            } else {
                0.0
            };
            comp = comp.max(c);
        }
        let stat = &self.h * x + &self.g + self.a.transpose() * y;
        KktResiduals { primal, dual: stat.amax(), complementarity: comp }
    }

    /// Structured text dump for failure triage.
    pub fn to_debug_text(&self) -> String {
        let mut s = String::new();
        let row = |v: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let parts: Vec<String> = it.map(|x| format!("{x:e}")).collect();
            let _ = writeln!(v, "  [{}]", parts.join(", "));
        };
        let _ = writeln!(s, "qp n={} m={}", self.n(), self.m());
        let _ = writeln!(s, "H:");
        for i in 0..self.n() {
            row(&mut s, &mut self.h.row(i).iter().copied());
        }
        let _ = writeln!(s, "g:");
        row(&mut s, &mut self.g.iter().copied());
        let _ = writeln!(s, "A:");
        for i in 0..self.m() {
            row(&mut s, &mut self.a.row(i).iter().copied());
        }
        let _ = writeln!(s, "l:");
        row(&mut s, &mut self.l.iter().copied());
        let _ = writeln!(s, "u:");
        row(&mut s, &mut self.u.iter().copied());
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Constraint multipliers: positive at an active upper bound, negative
    /// at an active lower bound.
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub polished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
    pub adapt_interval: usize,
    pub check_interval: usize,
    pub eps_infeasible: f64,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adapt_interval: 25,
            check_interval: 5,
            eps_infeasible: 1e-6,
            polish: true,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_primal > 0.0 && self.eps_dual > 0.0) {
            return Err(Error::validation("qp tolerances must be > 0"));
        }
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return Err(Error::validation("qp rho and sigma must be > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::validation("qp over-relaxation must lie in (0, 2)"));
        }
        if self.max_iter == 0 || self.adapt_interval == 0 || self.check_interval == 0 {
            return Err(Error::validation("qp iteration counts must be >= 1"));
        }
        Ok(())
    }
}

/// Solver workspace. Holds an optional warm start; one instance per caller.
type BestIterate = (f64, DVector<f64>, DVector<f64>, f64, f64);

#[derive(Debug, Default)]
pub struct QpSolver {
    warm_x: Option<DVector<f64>>,
    warm_y: Option<DVector<f64>>,
}

fn clamp_box(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().zip(l.iter().zip(u.iter())).map(|(x, (lo, hi))| x.max(*lo).min(*hi)))
}

fn box_violation(ax: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> f64 {
    ax.iter().zip(l.iter().zip(u.iter())).map(|(x, (lo, hi))| (lo - x).max(x - hi).max(0.0)).fold(0.0, f64::max)
}

fn factor(h: &DMatrix<f64>, ata: &DMatrix<f64>, sigma: f64, rho: f64) -> Cholesky<f64, nalgebra::Dyn> {
    let mut p = h + ata * rho;
    for i in 0..p.nrows() {
        p[(i, i)] += sigma;
    }
    Cholesky::new(p).expect("H + σI + ρAᵀA is positive definite for PSD H")
}

impl QpSolver {
    pub fn new() -> Self {
        QpSolver::default()
    }

    /// Starting point for the next solve; ignored on a dimension mismatch.
    pub fn warm_start(&mut self, x: DVector<f64>, y: Option<DVector<f64>>) {
        self.warm_x = Some(x);
        self.warm_y = y;
    }

    pub fn clear_warm_start(&mut self) {
        self.warm_x = None;
        self.warm_y = None;
    }

    pub fn solve(&mut self, p: &QpProblem, s: &QpSettings) -> QpSolution {
        let n = p.n();
        let m = p.m();
        let at = p.a.transpose();
        let ata = &at * &p.a;

        let mut x = self.warm_x.take().filter(|w| w.len() == n).unwrap_or_else(|| DVector::zeros(n));
        let mut y = self.warm_y.take().filter(|w| w.len() == m).unwrap_or_else(|| DVector::zeros(m));
        let mut z = clamp_box(&(&p.a * &x), &p.l, &p.u);

        let mut rho = s.rho;
        let mut chol = factor(&p.h, &ata, s.sigma, rho);

        let residuals = |x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>| {
            let ax = &p.a * x;
            let r_prim = if m == 0 { 0.0 } else { (&ax - z).amax() };
            let hx = &p.h * x;
            let aty = &at * y;
            let r_dual = (&hx + &p.g + &aty).amax();
            (r_prim, r_dual, ax, hx, aty)
        };

        // (score, x, y, primal residual, dual residual) of the best iterate.
        let mut best: Option<BestIterate> = None;
        let mut last_iter = 0;

        for k in 1..=s.max_iter {
            last_iter = k;
            let rhs = &x * s.sigma - &p.g + &at * (&z * rho - &y);
            let xt = chol.solve(&rhs);
            let zt = &p.a * &xt;
            let x_new = &xt * s.alpha + &x * (1.0 - s.alpha);
            let zr = &zt * s.alpha + &z * (1.0 - s.alpha);
            let z_new = clamp_box(&(&zr + &y / rho), &p.l, &p.u);
            let y_new = &y + (&zr - &z_new) * rho;
            let dy = &y_new - &y;
            x = x_new;
            z = z_new;
            y = y_new;

            let adapt_now = k % s.adapt_interval == 0;
            if k % s.check_interval != 0 && !adapt_now && k != s.max_iter {
                continue;
            }
            let (r_prim, r_dual, ax, hx, aty) = residuals(&x, &z, &y);
            let score = (r_prim / s.eps_primal).max(r_dual / s.eps_dual);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, x.clone(), y.clone(), r_prim, r_dual));
            }
            if r_prim <= s.eps_primal && r_dual <= s.eps_dual {
                let mut sol = self.finish(p, s, x, y, QpStatus::Solved, k);
                if s.polish {
                    if let Some(pol) = polish(p, s, &z, &sol.y) {
                        sol = pol.with_iterations(k);
                    }
                }
                return sol;
            }
            if m > 0 && primal_infeasible(p, &at, &dy, s.eps_infeasible) {
                return self.finish(p, s, x, y, QpStatus::PrimalInfeasible, k);
            }
            if adapt_now {
                if s.polish && score < 1e4 {
                    if let Some(pol) = polish(p, s, &z, &y) {
                        return pol.with_iterations(k);
                    }
                }
                if m > 0 {
                    let prim_norm = ax.amax().max(z.amax()) + 1e-10;
                    let dual_norm = hx.amax().max(aty.amax()).max(p.g.amax()) + 1e-10;
                    let ratio = (r_prim / prim_norm) / (r_dual / dual_norm + 1e-30);
                    let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                    if new_rho > 5.0 * rho || new_rho < rho / 5.0 {
                        rho = new_rho;
                        chol = factor(&p.h, &ata, s.sigma, rho);
                    }
                }
            }
        }
        let (_, bx, by, _, _) = best.expect("at least one residual check runs");
        self.finish(p, s, bx, by, QpStatus::MaxIterations, last_iter)
    }

    fn finish(
        &self,
        p: &QpProblem,
        _s: &QpSettings,
        x: DVector<f64>,
        y: DVector<f64>,
        status: QpStatus,
        iterations: usize,
    ) -> QpSolution {
        let ax = &p.a * &x;
        let primal_residual = box_violation(&ax, &p.l, &p.u);
        let dual_residual = (&p.h * &x + &p.g + p.a.transpose() * &y).amax();
        QpSolution { x, y, status, iterations, primal_residual, dual_residual, polished: false }
    }
}

impl QpSolution {
    fn with_iterations(mut self, k: usize) -> Self {
        self.iterations = k;
        self
    }

    /// Status is Solved and the certificate holds for the given tolerances.
    pub fn is_certified(&self, s: &QpSettings) -> bool {
        self.status == QpStatus::Solved && self.primal_residual <= s.eps_primal && self.dual_residual <= s.eps_dual
    }
}

/// Infeasibility certificate from the dual step `dy`: `Aᵀdy ≈ 0` while the
/// support function of the box along `dy` is negative.
fn primal_infeasible(p: &QpProblem, at: &DMatrix<f64>, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.amax();
    if norm < 1e-9 {
        return false;
    }
    if (at * dy).amax() > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let d = dy[i];
        if d.abs() <= eps * norm {
            continue;
        }
        let bound = if d > 0.0 { p.u[i] } else { p.l[i] };
        if !bound.is_finite() {
            return false;
        }
        support += bound * d;
    }
    support < -eps * norm
}

/// Solves the equality-constrained problem on the guessed active set and
/// returns it only when it satisfies the full KKT conditions.
fn polish(p: &QpProblem, s: &QpSettings, z: &DVector<f64>, y: &DVector<f64>) -> Option<QpSolution> {
    let n = p.n();
    // (row, bound value, side): side -1 lower, +1 upper, 0 equality.
    let mut active: Vec<(usize, f64, i8)> = Vec::new();
    for i in 0..p.m() {
        if p.l[i] == p.u[i] {
            active.push((i, p.l[i], 0));
        } else if p.l[i].is_finite() && z[i] - p.l[i] < -y[i] {
            active.push((i, p.l[i], -1));
        } else if p.u[i].is_finite() && p.u[i] - z[i] < y[i] {
            active.push((i, p.u[i], 1));
        }
    }
    let k = active.len();
    let dim = n + k;
    let delta = 1e-9;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
    let mut rhs = DVector::zeros(dim);
    for i in 0..n {
        rhs[i] = -p.g[i];
    }
    for (r, (row, b, _)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = p.a[(*row, j)];
            kkt[(j, n + r)] = p.a[(*row, j)];
        }
        rhs[n + r] = *b;
    }
    let mut reg = kkt.clone();
    for i in 0..dim {
        reg[(i, i)] += if i < n { delta } else { -delta };
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &kkt * &sol;
        if r.amax() < 1e-14 {
            break;
        }
        sol += lu.solve(&r)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, n).into_owned();
    let mut y_full = DVector::zeros(p.m());
    for (r, (row, _, side)) in active.iter().enumerate() {
        let yi = sol[n + r];
        let wrong_sign = match side {
            -1 => yi > s.eps_dual,
            1 => yi < -s.eps_dual,
            _ => false,
        };
        if wrong_sign {
            return None;
        }
        y_full[*row] = match side {
            -1 => yi.min(0.0),
            1 => yi.max(0.0),
            _ => yi,
        };
    }
    let ax = &p.a * &x;
    let primal_residual = box_violation(&ax, &p.l, &p.u);
    let dual_residual = (&p.h * &x + &p.g + p.a.transpose() * &y_full).amax();
    (primal_residual <= s.eps_primal && dual_residual <= s.eps_dual).then_some(QpSolution {
        x,
        y: y_full,
        status: QpStatus::Solved,
        iterations: 0,
        primal_residual,
        dual_residual,
        polished: true,
    })
}

/// One-shot solve with default ADMM parameters.
pub fn solve_qp(p: &QpProblem, eps_primal: f64, eps_dual: f64, max_iter: usize) -> QpSolution {
    let s = QpSettings { eps_primal, eps_dual, max_iter, ..QpSettings::default() };
    QpSolver::new().solve(p, &s)
}
