//! Damped Picard iteration on the frozen-coefficient linearization of the
//! semilinear control problem.
//!
//! Given `k`, the linear problem uses `a = A₀(k)` and `c = C₀(k)` where
//! `A₀(s) = F₀(s)/s` (`F₀'(0)` near zero). Its controlled state `y` updates
//! `k ← (1-θ)k + θy`.

use crate::error::{invalid, Result};
use crate::hum::{solve_hum, CgOptions, HumProblem, HumResult, Target};
use crate::mesh::{ControlRegion, DiscreteLaplacian};
use crate::pde::{
    l2q_distance, solve_forward_semilinear, Coefficient, CoefficientSet, CoupledSystem, Hypothesis, NewtonOptions,
    NodalSeries, NonlinearSpec, Nonlinearity, Placement, TimeGrid, Trajectory,
};
use crate::report::{Cell, CsvTable};
use crate::scalar::Scalar;

/// Node-wise `g(k)/k`, with `g'(0)` where `|k| ≤ 1e-12 · max|k|`.
/// Linear `g` gives a constant coefficient.
pub fn quotient_coefficient<T: Scalar>(g: &Nonlinearity<T>, k: &NodalSeries<T>) -> Coefficient<T> {
    if g.is_linear() {
        return Coefficient::Constant(g.derivative(T::zero()));
    }
    let tau = T::lit(1e-12) * k.max_abs();
    Coefficient::SpaceTime(k.map(|s| g.quotient(s, tau)))
}

/// Inner control-problem settings, fixed across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct HumSettings<T> {
    pub rho: Vec<T>,
    pub penalty: T,
    pub cg: CgOptions<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions<T> {
    pub theta: T,
    /// Stop once `‖kⁿ⁺¹ - kⁿ‖_{L²(Q)} ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Rerun with this damping if the first run does not converge.
    pub fallback_theta: Option<T>,
    pub newton: NewtonOptions<T>,
}

impl<T: Scalar> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            theta: T::one(),
            tol: T::lit(1e-6),
            max_iter: 30,
            fallback_theta: Some(T::lit(0.5)),
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointLogEntry {
    pub iteration: usize,
    pub difference: f64,
    pub control_norm: f64,
    pub terminal_norm: f64,
    pub cg_iters: usize,
}

/// Semilinear forward solve driven by the final control.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay<T> {
    pub trajectory: Trajectory<T>,
    pub terminal_norm: T,
    /// `‖y_replay - y_linear‖_{L²(Q)}`
    pub consistency: T,
    pub newton_max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FixedPointState<T> {
    pub iteration: usize,
    pub k: NodalSeries<T>,
    pub hum: HumResult<T>,
    pub difference: T,
    pub theta: T,
    pub converged: bool,
    /// Converged because the frozen coefficients stopped changing.
    pub stationary: bool,
    pub used_fallback: bool,
    pub history: Vec<FixedPointLogEntry>,
    /// Largest `|A₀|`, `|C₀|` value seen over all iterations.
    pub max_coefficient: T,
    /// Largest `‖vⁿ‖ / ‖y⁰‖` over all iterations (0 for `y⁰ = 0`).
    pub control_ratio: T,
    /// Present once the iteration converged.
    pub replay: Option<Replay<T>>,
}

impl<T: Scalar> FixedPointState<T> {
    pub fn csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["n", "difference", "control_norm", "terminal_norm", "cg_iters"]);
        for e in &self.history {
            t.push(vec![
                Cell::from(e.iteration),
                Cell::from(e.difference),
                Cell::from(e.control_norm),
                Cell::from(e.terminal_norm),
                Cell::from(e.cg_iters),
            ]);
        }
        t
    }
}

fn frozen<T: Scalar>(spec: &NonlinearSpec<T>, k: &NodalSeries<T>, placement: Placement) -> CoefficientSet<T> {
    CoefficientSet {
        a: quotient_coefficient(&spec.big_f, k),
        b: Coefficient::Constant(spec.b),
        c: quotient_coefficient(&spec.small_f, k),
        d: Coefficient::Constant(spec.d),
        hypothesis: match placement {
            Placement::InParabolic => Hypothesis::CConst,
            Placement::InElliptic => Hypothesis::BConst,
        },
        mu: spec.d,
    }
}

/// Runs the iteration from `k⁰ = 0`, falling back to the alternative
/// damping when requested. On convergence the semilinear system is replayed
/// with the final control.
///
/// `InParabolic` needs a linear `f₀`; `InElliptic` needs `b ≠ 0`.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_point<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    region: &ControlRegion<T>,
    grid: &TimeGrid<T>,
    spec: &NonlinearSpec<T>,
    y0: &[T],
    placement: Placement,
    hum: &HumSettings<T>,
    opts: &FixedPointOptions<T>,
) -> Result<FixedPointState<T>> {
    let relax = Relaxation { eps: T::zero(), z0: None };
    run_fixed_point_relaxed(lap, region, grid, spec, y0, placement, hum, opts, &relax)
}

/// Mass `ε` on the `z` row and its initial datum (required for `ε > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation<T> {
    pub eps: T,
    pub z0: Option<Vec<T>>,
}

/// [`run_fixed_point`] for the relaxed system `εz_t - Δz = f(y, z) + w`.
/// For `ε > 0` both terminal states are penalized.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_point_relaxed<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    region: &ControlRegion<T>,
    grid: &TimeGrid<T>,
    spec: &NonlinearSpec<T>,
    y0: &[T],
    placement: Placement,
    hum: &HumSettings<T>,
    opts: &FixedPointOptions<T>,
    relax: &Relaxation<T>,
) -> Result<FixedPointState<T>> {
    spec.validate(lap)?;
    if !(relax.eps >= T::zero()) {
        return invalid(format!("relaxation eps must be >= 0, got {}", relax.eps));
    }
    if placement == Placement::InParabolic && !spec.small_f.is_linear() {
        return invalid("control in the parabolic row needs a linear f0");
    }
    for th in std::iter::once(opts.theta).chain(opts.fallback_theta) {
        if !(th > T::zero() && th <= T::one()) {
            return invalid(format!("damping theta must lie in (0, 1], got {th}"));
        }
    }
    let first = picard(lap, region, grid, spec, y0, placement, hum, opts, relax, opts.theta)?;
    let mut state = match (first.converged, opts.fallback_theta) {
        (false, Some(th)) => {
            let mut s = picard(lap, region, grid, spec, y0, placement, hum, opts, relax, th)?;
            s.used_fallback = true;
            s
        }
        _ => first,
    };
    if state.converged {
        let (traj, stats) = solve_forward_semilinear(
            lap,
            spec,
            grid,
            relax.eps,
            Some(&state.hum.control),
            y0,
            relax.z0.as_deref(),
            &opts.newton,
        )?;
        let mesh = lap.mesh();
        state.replay = Some(Replay {
            terminal_norm: mesh.norm(traj.terminal_y()),
            consistency: l2q_distance(&traj.y, &state.hum.trajectory.y, mesh, grid),
            newton_max_iterations: stats.max_iterations(),
            trajectory: traj,
        });
    }
    Ok(state)
}

#[allow(clippy::too_many_arguments)]
fn picard<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    region: &ControlRegion<T>,
    grid: &TimeGrid<T>,
    spec: &NonlinearSpec<T>,
    y0: &[T],
    placement: Placement,
    hum: &HumSettings<T>,
    opts: &FixedPointOptions<T>,
    relax: &Relaxation<T>,
    theta: T,
) -> Result<FixedPointState<T>> {
    let mesh = lap.mesh();
    let n = lap.dof();
    let y0_norm = mesh.norm(y0);
    let mut k = NodalSeries::zeros(grid.node_count(), n);
    let mut coeffs = frozen(spec, &k, placement);
    let mut history = Vec::new();
    let mut max_coefficient = T::zero();
    let mut control_ratio = T::zero();
    let mut last = None;
    let mut difference = T::zero();
    let (mut converged, mut stationary) = (false, false);
    for it in 1..=opts.max_iter.max(1) {
        max_coefficient = max_coefficient.max(coeffs.a.sup_abs()).max(coeffs.c.sup_abs());
        let sys = CoupledSystem::new(lap, &coeffs, *grid, relax.eps)?;
        let problem = HumProblem {
            system: &sys,
            region,
            rho: hum.rho.clone(),
            penalty: hum.penalty,
            y0: y0.to_vec(),
            z0: relax.z0.clone(),
            placement,
            target: if relax.eps > T::zero() { Target::YZ } else { Target::Y },
            cg: hum.cg,
        };
        let res = solve_hum(&problem)?;
        let y = &res.trajectory.y;
        let k_new = k.scaled(T::one() - theta).add(&y.scaled(theta));
        difference = l2q_distance(&k_new, &k, mesh, grid);
        let next = frozen(spec, &k_new, placement);
        stationary = next.a == coeffs.a && next.c == coeffs.c;
        if y0_norm > T::zero() {
            control_ratio = control_ratio.max(res.control_norm / y0_norm);
        }
        history.push(FixedPointLogEntry {
            iteration: it,
            difference: difference.to_f64_lossy(),
            control_norm: res.control_norm.to_f64_lossy(),
            terminal_norm: res.terminal_y_norm.to_f64_lossy(),
            cg_iters: res.iterations,
        });
        k = k_new;
        coeffs = next;
        last = Some(res);
        if difference <= opts.tol || stationary {
            converged = true;
            break;
        }
    }
    Ok(FixedPointState {
        iteration: history.len(),
        k,
        hum: last.expect("at least one iteration runs"),
        difference,
        theta,
        converged,
        stationary,
        used_fallback: false,
        history,
        max_coefficient,
        control_ratio,
        replay: None,
    })
}
