//! Penalized HUM: conjugate gradient on the dual functional
//!
//! ```text
//! J*(x) = ½ Σ_j Δt ρ_j ‖obs^j(x)‖²_ω + (pen/2)‖x‖² + <s₀, x>
//! ```
//!
//! where `x` is the terminal pairing datum of the adjoint, `obs` is `φ` or
//! `ψ` depending on the control placement and `s₀` is the uncontrolled
//! terminal state. The control is `ρ · obs|_ω`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mesh::ControlRegion;
use crate::pde::{ControlField, CoupledSystem, Hypothesis, NodalSeries, Placement, Trajectory};
use crate::report::{Cell, CsvTable};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions<T> {
    /// Stop when `‖r‖ ≤ tol ‖r₀‖`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 500,
        }
    }
}

/// Which terminal states are penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `(1/pen) ‖y(T)‖²`
    Y,
    /// `(1/pen) (‖y(T)‖² + ‖z(T)‖²)`
    YZ,
}

#[derive(Debug, Clone)]
pub struct HumProblem<'a, T: Scalar> {
    pub system: &'a CoupledSystem<'a, T>,
    pub region: &'a ControlRegion<T>,
    /// Control weight at every step midpoint.
    pub rho: Vec<T>,
    pub penalty: T,
    pub y0: Vec<T>,
    /// Required when the system has `ε > 0`.
    pub z0: Option<Vec<T>>,
    pub placement: Placement,
    pub target: Target,
    pub cg: CgOptions<T>,
}

impl<T: Scalar> HumProblem<'_, T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > T::zero()) {
            return invalid(format!("penalty must be > 0, got {}", self.penalty));
        }
        let steps = self.system.grid().steps();
        if self.rho.len() != steps {
            return invalid(format!("rho has {} entries, expected {steps}", self.rho.len()));
        }
        if self.rho.iter().any(|&r| !(r >= T::zero()) || !r.is_finite()) {
            return invalid("control weight rho must be finite and >= 0");
        }
        if self.y0.len() != self.system.dof() {
            return invalid("y0 does not match the mesh");
        }
        match (self.placement, self.system.coefficients().hypothesis) {
            (Placement::InParabolic, Hypothesis::BConst) => {
                return invalid("control in the parabolic row needs hypothesis c_const or general")
            }
            (Placement::InElliptic, Hypothesis::CConst) => {
                return invalid("control in the elliptic row needs hypothesis b_const or general")
            }
            _ => {}
        }
        if !(self.cg.tol > T::zero()) {
            return invalid("cg tolerance must be > 0");
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.system.dof()
    }

    fn dual_len(&self) -> usize {
        match self.target {
            Target::Y => self.n(),
            Target::YZ => 2 * self.n(),
        }
    }

    fn dot(&self, a: &[T], b: &[T]) -> T {
        crate::scalar::dot(a, b) * self.system.laplacian().mesh().mass()
    }

    fn split<'b>(&self, x: &'b [T]) -> (&'b [T], Option<&'b [T]>) {
        match self.target {
            Target::Y => (x, None),
            Target::YZ => (&x[..self.n()], Some(&x[self.n()..])),
        }
    }

    fn terminal(&self, t: &Trajectory<T>) -> Vec<T> {
        let mut s = t.terminal_y().to_vec();
        if self.target == Target::YZ {
            s.extend_from_slice(t.terminal_z());
        }
        s
    }

    fn zero_z(&self) -> Option<Vec<T>> {
        (self.system.eps() > T::zero()).then(|| vec![T::zero(); self.n()])
    }

    /// Adjoint for the pairing datum `x`.
    pub fn adjoint(&self, x: &[T]) -> Result<Trajectory<T>> {
        let (p, q) = self.split(x);
        self.system.adjoint(p, q, None)
    }

    /// `ρ_j · obs^j|_ω` for every step.
    pub fn extract_control(&self, adjoint: &Trajectory<T>) -> ControlField<T> {
        let obs = match self.placement {
            Placement::InParabolic => &adjoint.y,
            Placement::InElliptic => &adjoint.z,
        };
        let steps = self.system.grid().steps();
        let mask = self.region.mask();
        let vals = NodalSeries::from_fn(steps, self.n(), |j, k| {
            if mask[k] {
                self.rho[j] * obs.at(j)[k]
            } else {
                T::zero()
            }
        });
        ControlField::restricted(self.placement, vals, self.region)
    }

    /// `Λx`: terminal state driven from rest by the control of `x`.
    pub fn apply_gramian(&self, x: &[T]) -> Result<Vec<T>> {
        let adj = self.adjoint(x)?;
        let g = self.extract_control(&adj);
        let zero = vec![T::zero(); self.n()];
        let fwd = self.system.forward(&zero, self.zero_z().as_deref(), Some(&g), None)?;
        Ok(self.terminal(&fwd))
    }

    /// Terminal state without control.
    pub fn free_response(&self) -> Result<Vec<T>> {
        let fwd = self.system.forward(&self.y0, self.z0.as_deref(), None, None)?;
        Ok(self.terminal(&fwd))
    }

    /// Dual functional and its gradient `Λx + pen x + s₀`.
    pub fn dual_value_and_gradient(&self, x: &[T], s0: &[T]) -> Result<(T, Vec<T>)> {
        let lx = self.apply_gramian(x)?;
        let half = T::lit(0.5);
        let grad: Vec<T> = (0..x.len()).map(|i| lx[i] + self.penalty * x[i] + s0[i]).collect();
        let val = half * self.dot(&lx, x) + half * self.penalty * self.dot(x, x) + self.dot(s0, x);
        Ok((val, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgLogEntry {
    pub iter: usize,
    /// `‖r‖ / ‖r₀‖`
    pub residual: f64,
    /// Primal functional of the current iterate.
    pub functional: f64,
}

pub fn cg_log_csv(log: &[CgLogEntry]) -> CsvTable {
    let mut t = CsvTable::new(&["iter", "residual", "J_eps"]);
    for e in log {
        t.push(vec![Cell::from(e.iter), Cell::from(e.residual), Cell::from(e.functional)]);
    }
    t
}

#[derive(Debug, Clone)]
pub struct HumResult<T> {
    pub control: ControlField<T>,
    /// Optimal pairing datum (`φ_T`, or `(φ_T, εψ_T)` for the pair target).
    pub dual: Vec<T>,
    pub trajectory: Trajectory<T>,
    pub terminal_y_norm: T,
    pub terminal_z_norm: T,
    /// `max ‖z(t_n)‖` over the last 10% of time nodes.
    pub z_tail_max: T,
    /// `max ‖g_j‖` over the last 10% of steps.
    pub control_tail_max: T,
    pub control_norm: T,
    /// `Σ Δt ρ_j^{-1} ‖g_j‖²`
    pub weighted_norm_sq: T,
    /// `weighted + (1/pen) · penalized terminal norm²`
    pub functional: T,
    pub iterations: usize,
    pub relative_residual: T,
    pub converged: bool,
    pub log: Vec<CgLogEntry>,
}

fn tail_start(count: usize) -> usize {
    count - count.div_ceil(10)
}

/// Minimizes the dual functional by conjugate gradient and rebuilds the
/// controlled trajectory.
pub fn solve_hum<T: Scalar>(problem: &HumProblem<'_, T>) -> Result<HumResult<T>> {
    problem.validate()?;
    let m = problem.dual_len();
    let pen = problem.penalty;
    let s0 = problem.free_response()?;
    let mut x = vec![T::zero(); m];
    let mut lx = vec![T::zero(); m];
    let mut r: Vec<T> = s0.iter().map(|&v| -v).collect();
    let r0 = problem.dot(&r, &r).sqrt();
    let mut log = Vec::new();
    let primal = |x: &[T], lx: &[T]| -> f64 {
        let s: Vec<T> = s0.iter().zip(lx).map(|(&a, &b)| a + b).collect();
        (problem.dot(lx, x) + problem.dot(&s, &s) / pen).to_f64_lossy()
    };
    log.push(CgLogEntry {
        iter: 0,
        residual: if r0 > T::zero() { 1.0 } else { 0.0 },
        functional: primal(&x, &lx),
    });
    let mut iterations = 0;
    let mut rel = T::zero();
    let mut converged = true;
    if r0 > T::zero() {
        let mut d = r.clone();
        let mut rr = problem.dot(&r, &r);
        converged = false;
        rel = T::one();
        for it in 1..=problem.cg.max_iter {
            let ld = problem.apply_gramian(&d)?;
            let ad: Vec<T> = ld.iter().zip(&d).map(|(&l, &v)| l + pen * v).collect();
            let curv = problem.dot(&d, &ad);
            if !(curv > T::zero()) {
                break;
            }
            let alpha = rr / curv;
            for i in 0..m {
                x[i] = x[i] + alpha * d[i];
                lx[i] = lx[i] + alpha * ld[i];
                r[i] = r[i] - alpha * ad[i];
            }
            let rr_new = problem.dot(&r, &r);
            iterations = it;
            rel = rr_new.sqrt() / r0;
            log.push(CgLogEntry {
                iter: it,
                residual: rel.to_f64_lossy(),
                functional: primal(&x, &lx),
            });
            if rel <= problem.cg.tol {
                converged = true;
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..m {
                d[i] = r[i] + beta * d[i];
            }
        }
    }

    let adj = problem.adjoint(&x)?;
    let control = problem.extract_control(&adj);
    let traj = problem
        .system
        .forward(&problem.y0, problem.z0.as_deref(), Some(&control), None)?;
    let mesh = problem.system.laplacian().mesh();
    let grid = problem.system.grid();
    let ty = mesh.norm(traj.terminal_y());
    let tz = mesh.norm(traj.terminal_z());
    let z_norms = traj.z_norms(mesh);
    let z_tail_max = z_norms[tail_start(z_norms.len())..]
        .iter()
        .fold(T::zero(), |a, &b| a.max(b));
    let c_norms = control.step_norms(mesh);
    let control_tail_max = c_norms[tail_start(c_norms.len())..]
        .iter()
        .fold(T::zero(), |a, &b| a.max(b));
    let weighted = control.weighted_norm_sq(mesh, grid, &problem.rho);
    let penalized = match problem.target {
        Target::Y => ty * ty,
        Target::YZ => ty * ty + tz * tz,
    };
    Ok(HumResult {
        control_norm: control.l2_norm(mesh, grid),
        control,
        dual: x,
        trajectory: traj,
        terminal_y_norm: ty,
        terminal_z_norm: tz,
        z_tail_max,
        control_tail_max,
        weighted_norm_sq: weighted,
        functional: weighted + penalized / pen,
        iterations,
        relative_residual: rel,
        converged,
        log,
    })
}

/// Residuals of the first-order optimality system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityReport {
    /// `‖x + S/pen‖ / ‖x‖` with `S` the penalized terminal state.
    pub terminal_residual: f64,
    /// Largest deviation of the stored control from `ρ · obs|_ω`.
    pub extraction_residual: f64,
    pub support_ok: bool,
    /// `weighted + (1/pen)‖S‖²`
    pub cost: f64,
    /// `-<y⁰, φ(0)> - ε<z⁰, ψ(0)>`; equals `cost` at the optimum.
    pub pairing: f64,
    /// `‖y⁰‖‖φ(0)‖ + ε‖z⁰‖‖ψ(0)‖`
    pub bound: f64,
}

impl OptimalityReport {
    /// All relations within `tol`, and the cost bound within `1e-8` slack.
    pub fn passes(&self, tol: f64) -> bool {
        self.terminal_residual <= tol
            && self.extraction_residual == 0.0
            && self.support_ok
            && self.cost <= self.bound * (1.0 + 1e-8) + 1e-300
    }
}

pub fn verify_optimality_system<T: Scalar>(problem: &HumProblem<'_, T>, result: &HumResult<T>) -> Result<OptimalityReport> {
    let mesh = problem.system.laplacian().mesh();
    let pen = problem.penalty.to_f64_lossy();
    let s = problem.terminal(&result.trajectory);
    let x = &result.dual;
    let mut diff = 0.0;
    let mut xn = 0.0;
    for i in 0..x.len() {
        let xi = x[i].to_f64_lossy();
        let d = xi + s[i].to_f64_lossy() / pen;
        diff += d * d;
        xn += xi * xi;
    }
    let terminal_residual = if xn == 0.0 { diff.sqrt() } else { (diff / xn).sqrt() };

    let adj = problem.adjoint(x)?;
    let again = problem.extract_control(&adj);
    let extraction_residual = again.values().sub(result.control.values()).max_abs().to_f64_lossy();
    let mask = problem.region.mask();
    let support_ok = (0..result.control.steps())
        .all(|j| result.control.step(j).iter().zip(mask).all(|(&v, &m)| m || v == T::zero()));

    let eps = problem.system.eps().to_f64_lossy();
    let f64n = |u: &[T]| mesh.norm(u).to_f64_lossy();
    let ip = |u: &[T], v: &[T]| mesh.inner(u, v).to_f64_lossy();
    let ss: f64 = s.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>() * mesh.mass().to_f64_lossy();
    let cost = result.weighted_norm_sq.to_f64_lossy() + ss / pen;
    let zero = vec![T::zero(); problem.n()];
    let z0 = problem.z0.as_deref().unwrap_or(&zero);
    let pairing = -ip(&problem.y0, adj.y.at(0)) - eps * ip(z0, adj.z.at(0));
    let bound = f64n(&problem.y0) * f64n(adj.y.at(0)) + eps * f64n(z0) * f64n(adj.z.at(0));
    Ok(OptimalityReport {
        terminal_residual,
        extraction_residual,
        support_ok,
        cost,
        pairing,
        bound,
    })
}

/// Central-difference check of the dual gradient at `x` along random
/// directions. Returns `(relative error, curvature <(Λ+pen)d, d>)` pairs.
pub fn dual_gradient_check<T: Scalar>(
    problem: &HumProblem<'_, T>,
    x: &[T],
    directions: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let s0 = problem.free_response()?;
    let (_, grad) = problem.dual_value_and_gradient(x, &s0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(directions);
    let xn = problem.dot(x, x).sqrt().max(T::lit(1e-30));
    for _ in 0..directions {
        let d: Vec<T> = (0..x.len()).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
        let dn = problem.dot(&d, &d).sqrt();
        let h = T::lit(1e-3) * xn / dn;
        let xp: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + h * b).collect();
        let xm: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a - h * b).collect();
        let (fp, _) = problem.dual_value_and_gradient(&xp, &s0)?;
        let (fm, _) = problem.dual_value_and_gradient(&xm, &s0)?;
        let fd = ((fp - fm) / (T::lit(2.0) * h)).to_f64_lossy();
        let exact = problem.dot(&grad, &d).to_f64_lossy();
        let rel = (fd - exact).abs() / exact.abs().max(1e-300);
        let ld = problem.apply_gramian(&d)?;
        let curv = (problem.dot(&ld, &d) + problem.penalty * problem.dot(&d, &d)).to_f64_lossy();
        out.push((rel, curv));
    }
    Ok(out)
}

/// Normalized directional derivatives of the primal functional at the
/// computed control, along random directions `δ_j = ρ_j ξ_j` on `ω`.
/// Each value is `|dJ(g; δ)| / (2 sqrt(J(g) Q(δ)))` with `Q` the quadratic
/// part of `J`; it vanishes at the exact minimizer.
pub fn primal_stationarity<T: Scalar>(
    problem: &HumProblem<'_, T>,
    result: &HumResult<T>,
    directions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mesh = problem.system.laplacian().mesh();
    let grid = problem.system.grid();
    let pen = problem.penalty;
    let zero = vec![T::zero(); problem.n()];
    let zero_z = problem.zero_z();
    let eval = |g: &ControlField<T>, y0: &[T], z0: Option<&[T]>| -> Result<T> {
        let t = problem.system.forward(y0, z0, Some(g), None)?;
        let s = problem.terminal(&t);
        Ok(g.weighted_norm_sq(mesh, grid, &problem.rho) + problem.dot(&s, &s) / pen)
    };
    let j0 = eval(&result.control, &problem.y0, problem.z0.as_deref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(directions);
    for _ in 0..directions {
        let vals = NodalSeries::from_fn(grid.steps(), problem.n(), |j, _| {
            problem.rho[j] * T::lit(rng.random_range(-1.0..1.0))
        });
        let delta = ControlField::restricted(problem.placement, vals, problem.region);
        let q = eval(&delta, &zero, zero_z.as_deref())?;
        let h = (j0 / q).sqrt() * T::lit(1e-3);
        let jp = eval(&result.control.add(&delta.scaled(h)), &problem.y0, problem.z0.as_deref())?;
        let jm = eval(&result.control.add(&delta.scaled(-h)), &problem.y0, problem.z0.as_deref())?;
        let dj = ((jp - jm) / (T::lit(2.0) * h)).to_f64_lossy();
        let scale = 2.0 * (j0.to_f64_lossy() * q.to_f64_lossy()).sqrt();
        out.push(if scale > 0.0 { dj.abs() / scale } else { 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub penalty: f64,
    pub terminal_norm: f64,
    pub control_norm: f64,
    pub weighted_norm: f64,
    pub cg_iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Terminal norms never grow by more than 5% between consecutive rows.
    pub monotone: bool,
    /// First over last terminal norm.
    pub terminal_reduction: f64,
    /// Largest over smallest positive weighted norm.
    pub weighted_spread: f64,
}

impl SweepReport {
    pub fn csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["eps", "terminal_norm", "control_norm", "weighted_norm", "cg_iters"]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.penalty),
                Cell::from(r.terminal_norm),
                Cell::from(r.control_norm),
                Cell::from(r.weighted_norm),
                Cell::from(r.cg_iters),
            ]);
        }
        t
    }
}

/// Runs [`solve_hum`] for each penalty (concurrently); the list must be
/// strictly decreasing.
pub fn penalty_sweep<T: Scalar>(problem: &HumProblem<'_, T>, penalties: &[T]) -> Result<SweepReport> {
    if penalties.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("penalty list must be strictly decreasing");
    }
    let rows: Vec<SweepRow> = penalties
        .par_iter()
        .map(|&pen| {
            let mut p = problem.clone();
            p.penalty = pen;
            let r = solve_hum(&p)?;
            Ok(SweepRow {
                penalty: pen.to_f64_lossy(),
                terminal_norm: r.terminal_y_norm.to_f64_lossy(),
                control_norm: r.control_norm.to_f64_lossy(),
                weighted_norm: r.weighted_norm_sq.to_f64_lossy().sqrt(),
                cg_iters: r.iterations,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].terminal_norm <= 1.05 * w[0].terminal_norm);
    let terminal_reduction = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if b.terminal_norm > 0.0 => a.terminal_norm / b.terminal_norm,
        _ => f64::NAN,
    };
    let pos: Vec<f64> = rows.iter().map(|r| r.weighted_norm).filter(|&w| w > 0.0).collect();
    let weighted_spread = if pos.is_empty() {
        f64::NAN
    } else {
        pos.iter().copied().fold(0.0, f64::max) / pos.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(SweepReport {
        rows,
        monotone,
        terminal_reduction,
        weighted_spread,
    })
}
