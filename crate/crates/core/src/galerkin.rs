//! Spectral Galerkin solver in the eigenbasis of the discrete Laplacian,
//! used to cross-check the finite-difference solvers.
//!
//! Unknowns are the mode coefficients `ŷ_j`, `ẑ_j` (`j < N`). Reaction
//! terms are evaluated at the nodes and projected back.

use crate::error::{invalid, Error, Result};
use crate::linalg::DenseLu;
use crate::mesh::{DiscreteLaplacian, Eigenbasis};
use crate::pde::{
    energy_audit, l2q_distance, l2q_norm, ControlField, EnergyReport, NewtonOptions, NodalSeries, Placement, Reaction,
    TimeGrid, Trajectory,
};
use crate::report::{Cell, CsvTable};
use crate::scalar::{max_abs, Scalar};

struct Modal<'a, T> {
    basis: &'a Eigenbasis<T>,
    modes: usize,
    dof: usize,
    mass: T,
}

impl<T: Scalar> Modal<'_, T> {
    fn lift(&self, c: &[T]) -> Vec<T> {
        let mut u = vec![T::zero(); self.dof];
        for (j, &cj) in c.iter().enumerate() {
            for (uk, &h) in u.iter_mut().zip(&self.basis.vectors[j]) {
                *uk = *uk + cj * h;
            }
        }
        u
    }

    fn project(&self, u: &[T]) -> Vec<T> {
        (0..self.modes)
            .map(|j| crate::scalar::dot(u, &self.basis.vectors[j]) * self.mass)
            .collect()
    }

    /// `(P diag(w) L)_{ij} = mass Σ_k h_i[k] w[k] h_j[k]`, row-major.
    fn weighted_gram(&self, w: &[T]) -> Vec<T> {
        let n = self.modes;
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            let hw: Vec<T> = self.basis.vectors[i].iter().zip(w).map(|(&h, &x)| h * x * self.mass).collect();
            for j in i..n {
                let v = crate::scalar::dot(&hw, &self.basis.vectors[j]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }
}

/// Damped Newton on a dense system; stops once the accepted update is below
/// `tol (1 + ‖U‖_∞)`.
fn newton<T: Scalar>(
    u: &mut [T],
    residual: &dyn Fn(&[T]) -> Vec<T>,
    jacobian: &dyn Fn(&[T]) -> Vec<T>,
    scale: &[T],
    opts: &NewtonOptions<T>,
    step: usize,
) -> Result<usize> {
    let m = u.len();
    let norm = |r: &[T]| r.iter().zip(scale).fold(T::zero(), |a, (&x, &s)| a.max((x * s).abs()));
    let mut r = residual(u);
    let mut res = norm(&r);
    if res == T::zero() {
        return Ok(0);
    }
    let mut trial = vec![T::zero(); m];
    for it in 1..=opts.max_iter {
        let lu = DenseLu::new(m, jacobian(u))?;
        let delta = lu.solve(&r);
        let mut lambda = T::one();
        for _ in 0..12 {
            for i in 0..m {
                trial[i] = u[i] - lambda * delta[i];
            }
            r = residual(&trial);
            if norm(&r) <= res {
                break;
            }
            lambda = lambda * T::lit(0.5);
        }
        u.copy_from_slice(&trial);
        res = norm(&r);
        if lambda * max_abs(&delta) <= opts.tol * (T::one() + max_abs(u)) {
            return Ok(it);
        }
    }
    Err(Error::NewtonStall {
        step,
        iterations: opts.max_iter,
        residual: res.to_f64_lossy(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinSolution<T> {
    pub modes: usize,
    /// Mode coefficients at every time node.
    pub y_hat: NodalSeries<T>,
    pub z_hat: NodalSeries<T>,
    /// Nodal lift of the coefficients.
    pub trajectory: Trajectory<T>,
    pub newton_iterations: Vec<usize>,
}

impl<T: Scalar> GalerkinSolution<T> {
    /// Long-format coefficient dump `(t, j, y_hat, z_hat)`, `j` from 1.
    pub fn coefficient_csv(&self) -> CsvTable {
        let grid = &self.trajectory.grid;
        let mut t = CsvTable::new(&["t", "j", "y_hat", "z_hat"]);
        for n in 0..grid.node_count() {
            for j in 0..self.modes {
                t.push(vec![
                    Cell::from(grid.node(n).to_f64_lossy()),
                    Cell::from(j + 1),
                    Cell::from(self.y_hat.at(n)[j].to_f64_lossy()),
                    Cell::from(self.z_hat.at(n)[j].to_f64_lossy()),
                ]);
            }
        }
        t
    }
}

/// Implicit Euler in the span of the first `modes` eigenvectors. At
/// `ε = 0` the initial `ẑ` solves the projected elliptic row; otherwise
/// `z0` is projected. `opts.guess_offset` shifts every Newton start.
#[allow(clippy::too_many_arguments)]
pub fn solve_galerkin<T: Scalar, R: Reaction<T>>(
    lap: &DiscreteLaplacian<T>,
    reaction: &R,
    grid: &TimeGrid<T>,
    eps: T,
    control: Option<&ControlField<T>>,
    y0: &[T],
    z0: Option<&[T]>,
    modes: usize,
    opts: &NewtonOptions<T>,
) -> Result<GalerkinSolution<T>> {
    let Some(basis) = lap.basis() else {
        return invalid("the Galerkin solver needs a Laplacian assembled with its eigenbasis");
    };
    let dof = lap.dof();
    if modes == 0 || modes > dof {
        return invalid(format!("truncation order must lie in 1..={dof}, got {modes}"));
    }
    if y0.len() != dof {
        return invalid("y0 does not match the mesh");
    }
    if !(eps >= T::zero()) {
        return invalid(format!("relaxation eps must be >= 0, got {eps}"));
    }
    if let Some(c) = control {
        if c.steps() != grid.steps() || c.values().dof() != dof {
            return invalid("control shape does not match the grids");
        }
    }
    let md = Modal {
        basis,
        modes,
        dof,
        mass: lap.mesh().mass(),
    };
    let mu = &basis.values[..modes];
    let dt = grid.dt();
    let nn = modes;

    let eval = |node: usize, yh: &[T], zh: &[T]| {
        let y = md.lift(yh);
        let z = md.lift(zh);
        let vals: Vec<_> = (0..dof).map(|k| reaction.eval(node, k, y[k], z[k])).collect();
        vals
    };

    let yh0 = md.project(y0);
    let zh0 = if eps > T::zero() {
        match z0 {
            Some(z) if z.len() == dof => md.project(z),
            _ => return invalid("relaxed system (eps > 0) needs an initial z0 of mesh size"),
        }
    } else {
        let residual = |zh: &[T]| -> Vec<T> {
            let v = eval(0, &yh0, zh);
            let fz: Vec<T> = v.iter().map(|r| r.fz).collect();
            let pf = md.project(&fz);
            (0..nn).map(|j| mu[j] * zh[j] - pf[j]).collect()
        };
        let jacobian = |zh: &[T]| -> Vec<T> {
            let v = eval(0, &yh0, zh);
            let w: Vec<T> = v.iter().map(|r| r.fz_z).collect();
            let mut g = md.weighted_gram(&w);
            g.iter_mut().for_each(|x| *x = -*x);
            for j in 0..nn {
                g[j * nn + j] = g[j * nn + j] + mu[j];
            }
            g
        };
        let scale: Vec<T> = mu.iter().map(|&m| T::one() / m).collect();
        let mut zh = vec![opts.guess_offset; nn];
        newton(&mut zh, &residual, &jacobian, &scale, opts, 0)?;
        zh
    };

    let nodes = grid.node_count();
    let mut y_hat = NodalSeries::zeros(nodes, nn);
    let mut z_hat = NodalSeries::zeros(nodes, nn);
    y_hat.at_mut(0).copy_from_slice(&yh0);
    z_hat.at_mut(0).copy_from_slice(&zh0);
    let mut iterations = Vec::with_capacity(grid.steps());
    let mut scale = vec![T::zero(); 2 * nn];
    for j in 0..nn {
        scale[j] = T::one() / (T::one() / dt + mu[j]);
        scale[nn + j] = T::one() / (eps / dt + mu[j]);
    }
    for step in 0..grid.steps() {
        let node = step + 1;
        let (gy, gz) = match control {
            Some(c) => {
                let p = md.project(c.step(step));
                match c.placement() {
                    Placement::InParabolic => (p, vec![T::zero(); nn]),
                    Placement::InElliptic => (vec![T::zero(); nn], p),
                }
            }
            None => (vec![T::zero(); nn], vec![T::zero(); nn]),
        };
        let yp = y_hat.at(step).to_vec();
        let zp = z_hat.at(step).to_vec();
        let residual = |u: &[T]| -> Vec<T> {
            let (yh, zh) = u.split_at(nn);
            let v = eval(node, yh, zh);
            let fy: Vec<T> = v.iter().map(|r| r.fy).collect();
            let fz: Vec<T> = v.iter().map(|r| r.fz).collect();
            let (pfy, pfz) = (md.project(&fy), md.project(&fz));
            let mut out = vec![T::zero(); 2 * nn];
            for i in 0..nn {
                out[i] = (yh[i] - yp[i]) / dt + mu[i] * yh[i] - pfy[i] - gy[i];
                out[nn + i] = eps * (zh[i] - zp[i]) / dt + mu[i] * zh[i] - pfz[i] - gz[i];
            }
            out
        };
        let jacobian = |u: &[T]| -> Vec<T> {
            let (yh, zh) = u.split_at(nn);
            let v = eval(node, yh, zh);
            let m = 2 * nn;
            let mut jac = vec![T::zero(); m * m];
            let blocks = [
                (0, 0, v.iter().map(|r| r.fy_y).collect::<Vec<T>>()),
                (0, nn, v.iter().map(|r| r.fy_z).collect()),
                (nn, 0, v.iter().map(|r| r.fz_y).collect()),
                (nn, nn, v.iter().map(|r| r.fz_z).collect()),
            ];
            for (r0, c0, w) in blocks {
                let g = md.weighted_gram(&w);
                for i in 0..nn {
                    for k in 0..nn {
                        jac[(r0 + i) * m + c0 + k] = -g[i * nn + k];
                    }
                }
            }
            for i in 0..nn {
                jac[i * m + i] = jac[i * m + i] + T::one() / dt + mu[i];
                jac[(nn + i) * m + nn + i] = jac[(nn + i) * m + nn + i] + eps / dt + mu[i];
            }
            jac
        };
        let mut u: Vec<T> = yp.iter().chain(&zp).map(|&x| x + opts.guess_offset).collect();
        let its = newton(&mut u, &residual, &jacobian, &scale, opts, step)?;
        iterations.push(its);
        y_hat.at_mut(node).copy_from_slice(&u[..nn]);
        z_hat.at_mut(node).copy_from_slice(&u[nn..]);
    }

    let mut traj = Trajectory::zeros(*grid, dof);
    for n in 0..nodes {
        traj.y.at_mut(n).copy_from_slice(&md.lift(y_hat.at(n)));
        traj.z.at_mut(n).copy_from_slice(&md.lift(z_hat.at(n)));
    }
    Ok(GalerkinSolution {
        modes,
        y_hat,
        z_hat,
        trajectory: traj,
        newton_iterations: iterations,
    })
}

/// Inputs shared by every run of [`wellposedness_suite`].
#[derive(Debug, Clone)]
pub struct SuiteInput<'a, T: Scalar, R: Reaction<T>> {
    pub lap: &'a DiscreteLaplacian<T>,
    pub reaction: &'a R,
    pub grid: TimeGrid<T>,
    pub y0: Vec<T>,
    pub control: Option<ControlField<T>>,
    /// Bound on the `z` reaction slope, used by the energy audit.
    pub mu: T,
    pub newton: NewtonOptions<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellposednessReport {
    pub modes: Vec<usize>,
    /// `L²(Q)` distances between consecutive truncation orders.
    pub distances: Vec<f64>,
    pub distances_decreasing: bool,
    /// Energy audit at the largest truncation order.
    pub energy: EnergyReport,
    /// Smallest `C` with `‖(ŷⁿ⁺¹-ŷⁿ)/Δt‖_{H⁻¹} ≤ C(‖yⁿ⁺¹‖_{H¹} + ‖gⁿ‖)`.
    pub dual_constant: f64,
    /// `L²(Q)` distance between runs from Newton guesses offset by ±0.5.
    pub uniqueness_gap: f64,
    /// Mean `|ŷ_j(0)|` over the last quarter of modes is below the first quarter's.
    pub spectral_decay: bool,
}

impl WellposednessReport {
    pub fn passes(&self) -> bool {
        self.distances_decreasing
            && self.energy.holds()
            && self.dual_constant.is_finite()
            && self.uniqueness_gap <= 1e-8
            && self.spectral_decay
    }
}

/// N-convergence, energy and dual-norm estimates, and a uniqueness probe
/// for the Galerkin solutions at the listed truncation orders (increasing).
pub fn wellposedness_suite<T: Scalar, R: Reaction<T>>(
    input: &SuiteInput<'_, T, R>,
    modes: &[usize],
) -> Result<WellposednessReport> {
    if modes.is_empty() || modes.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("truncation orders must be a non-empty increasing list");
    }
    let grid = &input.grid;
    let mesh = input.lap.mesh();
    let ctrl = input.control.as_ref();
    let solve = |n: usize, offset: T| {
        let opts = NewtonOptions {
            guess_offset: offset,
            ..input.newton
        };
        solve_galerkin(input.lap, input.reaction, grid, T::zero(), ctrl, &input.y0, None, n, &opts)
    };
    let sols: Vec<GalerkinSolution<T>> = modes.iter().map(|&n| solve(n, T::zero())).collect::<Result<_>>()?;
    let distances: Vec<f64> = sols
        .windows(2)
        .map(|w| l2q_distance(&w[1].trajectory.y, &w[0].trajectory.y, mesh, grid).to_f64_lossy())
        .collect();
    let distances_decreasing = distances.windows(2).all(|w| w[1] <= w[0]);

    let top = sols.last().expect("non-empty");
    let controls: Vec<&ControlField<T>> = ctrl.into_iter().collect();
    let energy = energy_audit(input.lap, &top.trajectory, &controls, input.mu, T::zero());

    let mu = &input.lap.basis().expect("checked by the solver").values;
    let dt = grid.dt().to_f64_lossy();
    let mut dual_constant = 0.0f64;
    for step in 0..grid.steps() {
        let (a, b) = (top.y_hat.at(step), top.y_hat.at(step + 1));
        let mut dual = 0.0;
        let mut h1 = 0.0;
        for j in 0..top.modes {
            let d = (b[j] - a[j]).to_f64_lossy() / dt;
            let m = mu[j].to_f64_lossy();
            dual += d * d / m;
            h1 += m * b[j].to_f64_lossy().powi(2);
        }
        let g = ctrl.map_or(0.0, |c| mesh.norm(c.step(step)).to_f64_lossy());
        let denom = h1.sqrt() + g;
        if dual > 0.0 {
            dual_constant = if denom > 0.0 { dual_constant.max(dual.sqrt() / denom) } else { f64::INFINITY };
        }
    }

    let n_top = *modes.last().expect("non-empty");
    let up = solve(n_top, T::lit(0.5))?;
    let down = solve(n_top, T::lit(-0.5))?;
    let scale = 1.0 + l2q_norm(&top.trajectory.y, mesh, grid).to_f64_lossy();
    let uniqueness_gap = (l2q_distance(&up.trajectory.y, &down.trajectory.y, mesh, grid)
        .max(l2q_distance(&up.trajectory.z, &down.trajectory.z, mesh, grid)))
    .to_f64_lossy()
        / scale;

    let c0: Vec<f64> = top.y_hat.at(0).iter().map(|v| v.abs().to_f64_lossy()).collect();
    let q = (c0.len() / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&c0[..q]);
    let last = mean(&c0[c0.len() - q..]);
    let spectral_decay = last < first || (first == 0.0 && last == 0.0);

    Ok(WellposednessReport {
        modes: modes.to_vec(),
        distances,
        distances_decreasing,
        energy,
        dual_constant,
        uniqueness_gap,
        spectral_decay,
    })
}
