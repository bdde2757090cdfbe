//! Parabolic relaxation `εz_t - Δz = cy + dz + w` of the elliptic row and
//! the behaviour of its null controls as `ε → 0`.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fixed_point::{run_fixed_point_relaxed, FixedPointOptions, HumSettings, Relaxation};
use crate::hum::{solve_hum, HumProblem, HumResult, Target};
use crate::mesh::{ControlRegion, DiscreteLaplacian};
use crate::pde::{energy_audit, CoefficientSet, ControlField, CoupledSystem, NonlinearSpec, Placement, TimeGrid, Trajectory};
use crate::report::{Cell, CsvTable};
use crate::scalar::Scalar;

/// Forward solve of the relaxed system; `ε = 0` is the elliptic solver and
/// ignores `z0`.
#[allow(clippy::too_many_arguments)]
pub fn solve_forward_eps<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    coeffs: &CoefficientSet<T>,
    grid: TimeGrid<T>,
    eps: T,
    control: Option<&ControlField<T>>,
    y0: &[T],
    z0: &[T],
) -> Result<Trajectory<T>> {
    let sys = CoupledSystem::new(lap, coeffs, grid, eps)?;
    let z0 = (eps > T::zero()).then_some(z0);
    sys.forward(y0, z0, control, None)
}

/// Linear coefficients or a separated nonlinearity solved by the fixed
/// point iteration.
#[derive(Debug, Clone)]
pub enum Dynamics<T> {
    Linear(CoefficientSet<T>),
    Semilinear(NonlinearSpec<T>, FixedPointOptions<T>),
}

/// Everything except `ε`; the control acts in the `z` row.
#[derive(Debug, Clone)]
pub struct EpsProblem<'a, T: Scalar> {
    pub lap: &'a DiscreteLaplacian<T>,
    pub region: &'a ControlRegion<T>,
    pub grid: TimeGrid<T>,
    pub dynamics: Dynamics<T>,
    pub hum: HumSettings<T>,
    pub y0: Vec<T>,
    pub z0: Vec<T>,
}

impl<T: Scalar> EpsProblem<'_, T> {
    fn validate(&self) -> Result<()> {
        let n = self.lap.dof();
        if self.y0.len() != n || self.z0.len() != n {
            return invalid("initial data do not match the mesh");
        }
        Ok(())
    }
}

/// Null control of the relaxed system with both terminal states penalized.
/// `ε = 0` solves the limit problem.
pub fn solve_hum_eps<T: Scalar>(problem: &EpsProblem<'_, T>, eps: T) -> Result<HumResult<T>> {
    problem.validate()?;
    if !(eps >= T::zero()) {
        return invalid(format!("relaxation eps must be >= 0, got {eps}"));
    }
    let z0 = (eps > T::zero()).then(|| problem.z0.clone());
    match &problem.dynamics {
        Dynamics::Linear(c) => {
            let sys = CoupledSystem::new(problem.lap, c, problem.grid, eps)?;
            solve_hum(&HumProblem {
                system: &sys,
                region: problem.region,
                rho: problem.hum.rho.clone(),
                penalty: problem.hum.penalty,
                y0: problem.y0.clone(),
                z0,
                placement: Placement::InElliptic,
                target: Target::YZ,
                cg: problem.hum.cg,
            })
        }
        Dynamics::Semilinear(spec, opts) => {
            // The limit uses the pair penalty too, so every row solves the same functional.
            let relax = Relaxation { eps, z0 };
            let state = run_fixed_point_relaxed(
                problem.lap,
                problem.region,
                &problem.grid,
                spec,
                &problem.y0,
                Placement::InElliptic,
                &problem.hum,
                opts,
                &relax,
            )?;
            if !state.converged {
                return Err(crate::Error::NotConverged {
                    context: format!("fixed point at eps = {eps}"),
                    detail: format!("difference {}", state.difference),
                });
            }
            Ok(state.hum)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsRow {
    pub eps: f64,
    pub control_norm: f64,
    pub weighted_norm: f64,
    /// `‖w_ε‖ / (‖y⁰‖ + ε‖z⁰‖)`
    pub bound_ratio: f64,
    pub terminal_y: f64,
    pub terminal_z: f64,
    pub distance_to_limit: f64,
    pub cg_iters: usize,
    /// Energy inequality held with a finite constant.
    pub energy_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsSweepResult {
    pub rows: Vec<EpsRow>,
    /// `‖w_{ε_{i+1}} - w_{ε_i}‖`; empty for a single row.
    pub cauchy: Vec<f64>,
    pub cauchy_monotone: bool,
    pub limit_control_norm: f64,
    /// Largest over smallest positive bound ratio.
    pub bound_spread: f64,
    /// First over last distance to the limit control.
    pub limit_reduction: f64,
    pub limit_monotone: bool,
}

impl EpsSweepResult {
    pub fn csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "eps",
            "control_norm",
            "bound_ratio",
            "terminal_y",
            "terminal_z",
            "distance_to_limit",
        ]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.eps),
                Cell::from(r.control_norm),
                Cell::from(r.bound_ratio),
                Cell::from(r.terminal_y),
                Cell::from(r.terminal_z),
                Cell::from(r.distance_to_limit),
            ]);
        }
        t
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let pos: Vec<f64> = values.filter(|&v| v > 0.0).collect();
    if pos.is_empty() {
        return f64::NAN;
    }
    pos.iter().copied().fold(0.0, f64::max) / pos.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solves every `ε` (concurrently) plus the `ε = 0` limit and compares the
/// controls in `L²(ω × (0,T))`. The list must be strictly decreasing and
/// positive.
pub fn eps_sweep<T: Scalar>(problem: &EpsProblem<'_, T>, eps_list: &[T]) -> Result<EpsSweepResult> {
    problem.validate()?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > T::zero())) {
        return invalid("eps list must be non-empty and positive");
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("eps list must be strictly decreasing");
    }
    let mesh = problem.lap.mesh();
    let grid = &problem.grid;
    let limit = solve_hum_eps(problem, T::zero())?;
    let results: Vec<HumResult<T>> = eps_list
        .par_iter()
        .map(|&e| solve_hum_eps(problem, e))
        .collect::<Result<_>>()?;
    let y0n = mesh.norm(&problem.y0).to_f64_lossy();
    let z0n = mesh.norm(&problem.z0).to_f64_lossy();
    let mu = match &problem.dynamics {
        Dynamics::Linear(c) => c.mu,
        Dynamics::Semilinear(s, _) => s.d,
    };
    let mut rows = Vec::with_capacity(results.len());
    for (&e, r) in eps_list.iter().zip(&results) {
        let ef = e.to_f64_lossy();
        let cn = r.control_norm.to_f64_lossy();
        let scale = y0n + ef * z0n;
        let audit = energy_audit(problem.lap, &r.trajectory, &[&r.control], mu, e);
        rows.push(EpsRow {
            eps: ef,
            control_norm: cn,
            weighted_norm: r.weighted_norm_sq.to_f64_lossy().sqrt(),
            bound_ratio: if scale > 0.0 { cn / scale } else { 0.0 },
            terminal_y: r.terminal_y_norm.to_f64_lossy(),
            terminal_z: r.terminal_z_norm.to_f64_lossy(),
            distance_to_limit: r.control.distance(&limit.control, mesh, grid).to_f64_lossy(),
            cg_iters: r.iterations,
            energy_holds: audit.holds(),
        });
    }
    let cauchy: Vec<f64> = results
        .windows(2)
        .map(|w| w[1].control.distance(&w[0].control, mesh, grid).to_f64_lossy())
        .collect();
    let cauchy_monotone = cauchy.windows(2).all(|w| w[1] <= w[0]);
    let limit_monotone = rows.windows(2).all(|w| w[1].distance_to_limit <= w[0].distance_to_limit);
    let limit_reduction = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if b.distance_to_limit > 0.0 => a.distance_to_limit / b.distance_to_limit,
        _ => f64::NAN,
    };
    Ok(EpsSweepResult {
        bound_spread: spread(rows.iter().map(|r| r.bound_ratio)),
        rows,
        cauchy,
        cauchy_monotone,
        limit_control_norm: limit.control_norm.to_f64_lossy(),
        limit_reduction,
        limit_monotone,
    })
}
