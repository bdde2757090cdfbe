use crate::error::{invalid, Error, Result};
use crate::mesh::DiscreteLaplacian;
use crate::scalar::{max_abs, Scalar};

use super::{assemble_block, ControlField, Placement, Reaction, TimeGrid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions<T> {
    /// Update tolerance, relative to `1 + ‖U‖_∞`.
    pub tol: T,
    pub max_iter: usize,
    /// Added to every entry of the initial guess; used to probe uniqueness.
    pub guess_offset: T,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 25,
            guess_offset: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearStats {
    /// Newton iterations taken at each step.
    pub iterations: Vec<usize>,
    /// Final scaled residual at each step.
    pub residuals: Vec<f64>,
}

impl SemilinearStats {
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }
}

struct Stepper<'a, T: Scalar, R: Reaction<T>> {
    lap: &'a DiscreteLaplacian<T>,
    reaction: &'a R,
    dt: T,
    eps: T,
    inv_diag: [T; 2],
}

impl<T: Scalar, R: Reaction<T>> Stepper<'_, T, R> {
    /// Residual at node `node` given the previous state and control.
    fn residual(&self, node: usize, u: &[T], prev: &[T], g: &[T], out: &mut [T]) {
        let n = self.lap.dof();
        let y: Vec<T> = (0..n).map(|k| u[2 * k]).collect();
        let z: Vec<T> = (0..n).map(|k| u[2 * k + 1]).collect();
        let ay = self.lap.apply(&y);
        let az = self.lap.apply(&z);
        for k in 0..n {
            let r = self.reaction.eval(node, k, y[k], z[k]);
            out[2 * k] = (y[k] - prev[2 * k]) / self.dt + ay[k] - r.fy - g[2 * k];
            out[2 * k + 1] = self.eps * (z[k] - prev[2 * k + 1]) / self.dt + az[k] - r.fz - g[2 * k + 1];
        }
    }

    fn scaled_norm(&self, r: &[T]) -> T {
        r.iter()
            .enumerate()
            .fold(T::zero(), |m, (i, &x)| m.max((x * self.inv_diag[i % 2]).abs()))
    }

    fn jacobian_solve(&self, node: usize, u: &[T], rhs: &mut [T]) -> Result<()> {
        let n = self.lap.dof();
        let mut a = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        for k in 0..n {
            let r = self.reaction.eval(node, k, u[2 * k], u[2 * k + 1]);
            a[k] = r.fy_y;
            b[k] = r.fy_z;
            c[k] = r.fz_y;
            d[k] = r.fz_z;
        }
        let lu = assemble_block(self.lap, self.dt, self.eps, &a, &b, &c, &d).factor()?;
        lu.solve(rhs);
        Ok(())
    }

    /// Damped Newton from `u`; returns iterations and final scaled
    /// residual. Stops once the accepted update is below
    /// `tol (1 + ‖U‖_∞)`.
    fn newton(&self, node: usize, u: &mut [T], prev: &[T], g: &[T], opts: &NewtonOptions<T>) -> Result<(usize, T)> {
        let mut r = vec![T::zero(); u.len()];
        self.residual(node, u, prev, g, &mut r);
        let mut res = self.scaled_norm(&r);
        if res == T::zero() {
            return Ok((0, res));
        }
        let mut trial = vec![T::zero(); u.len()];
        for it in 1..=opts.max_iter {
            let mut delta = r.clone();
            self.jacobian_solve(node, u, &mut delta)?;
            let mut lambda = T::one();
            for _ in 0..12 {
                for i in 0..u.len() {
                    trial[i] = u[i] - lambda * delta[i];
                }
                self.residual(node, &trial, prev, g, &mut r);
                if self.scaled_norm(&r) <= res {
                    break;
                }
                lambda = lambda * T::lit(0.5);
            }
            // The last (smallest) damped step is kept even without decrease.
            u.copy_from_slice(&trial);
            res = self.scaled_norm(&r);
            if lambda * max_abs(&delta) <= opts.tol * (T::one() + max_abs(u)) {
                return Ok((it, res));
            }
        }
        Err(Error::NewtonStall {
            step: node,
            iterations: opts.max_iter,
            residual: res.to_f64_lossy(),
        })
    }
}

/// Implicit Euler for `y_t - Δy = F(y,z) + v`, `εz_t - Δz = f(y,z) + w`
/// with Newton's method at every step.
///
/// At `ε = 0` the initial `z⁰` solves the elliptic row with `y⁰`;
/// otherwise `z0` is required.
#[allow(clippy::too_many_arguments)]
pub fn solve_forward_semilinear<T: Scalar, R: Reaction<T>>(
    lap: &DiscreteLaplacian<T>,
    reaction: &R,
    grid: &TimeGrid<T>,
    eps: T,
    control: Option<&ControlField<T>>,
    y0: &[T],
    z0: Option<&[T]>,
    opts: &NewtonOptions<T>,
) -> Result<(Trajectory<T>, SemilinearStats)> {
    let n = lap.dof();
    if y0.len() != n {
        return invalid(format!("y0 has {} entries, mesh has {n}", y0.len()));
    }
    if !(eps >= T::zero()) {
        return invalid(format!("relaxation eps must be >= 0, got {eps}"));
    }
    if let Some(c) = control {
        if c.steps() != grid.steps() || c.values().dof() != n {
            return invalid("control shape does not match the grids");
        }
    }
    let dt = grid.dt();
    let diag = lap.diagonal();
    let st = Stepper {
        lap,
        reaction,
        dt,
        eps,
        inv_diag: [T::one() / (T::one() / dt + diag), T::one() / (eps / dt + diag)],
    };
    let mut traj = Trajectory::zeros(*grid, n);
    traj.y.at_mut(0).copy_from_slice(y0);
    let z_init = if eps > T::zero() {
        match z0 {
            Some(z) if z.len() == n => z.to_vec(),
            _ => return invalid("relaxed system (eps > 0) needs an initial z0 of mesh size"),
        }
    } else {
        initial_elliptic(lap, reaction, y0, opts)?
    };
    traj.z.at_mut(0).copy_from_slice(&z_init);

    let mut stats = SemilinearStats {
        iterations: Vec::with_capacity(grid.steps()),
        residuals: Vec::with_capacity(grid.steps()),
    };
    let mut prev = vec![T::zero(); 2 * n];
    let mut g = vec![T::zero(); 2 * n];
    let mut u = vec![T::zero(); 2 * n];
    for j in 0..grid.steps() {
        for k in 0..n {
            prev[2 * k] = traj.y.at(j)[k];
            prev[2 * k + 1] = traj.z.at(j)[k];
        }
        g.iter_mut().for_each(|x| *x = T::zero());
        if let Some(c) = control {
            let off = usize::from(c.placement() == Placement::InElliptic);
            for (k, &v) in c.step(j).iter().enumerate() {
                g[2 * k + off] = v;
            }
        }
        for i in 0..2 * n {
            u[i] = prev[i] + opts.guess_offset;
        }
        let (its, res) = st.newton(j + 1, &mut u, &prev, &g, opts).map_err(|e| match e {
            Error::NewtonStall { iterations, residual, .. } => Error::NewtonStall {
                step: j,
                iterations,
                residual,
            },
            other => other,
        })?;
        stats.iterations.push(its);
        stats.residuals.push(res.to_f64_lossy());
        for k in 0..n {
            traj.y.at_mut(j + 1)[k] = u[2 * k];
            traj.z.at_mut(j + 1)[k] = u[2 * k + 1];
        }
    }
    Ok((traj, stats))
}

/// Solves `A z = f(y⁰, z)` for `z` by Newton.
fn initial_elliptic<T: Scalar, R: Reaction<T>>(
    lap: &DiscreteLaplacian<T>,
    reaction: &R,
    y0: &[T],
    opts: &NewtonOptions<T>,
) -> Result<Vec<T>> {
    let n = lap.dof();
    let mut z = vec![T::zero(); n];
    let diag = lap.diagonal();
    for it in 0..=opts.max_iter {
        let az = lap.apply(&z);
        let mut r = vec![T::zero(); n];
        let mut shift = vec![T::zero(); n];
        for k in 0..n {
            let v = reaction.eval(0, k, y0[k], z[k]);
            r[k] = az[k] - v.fz;
            shift[k] = -v.fz_z;
        }
        let res = max_abs(&r) / diag;
        if res <= opts.tol * (T::one() + max_abs(&z)) {
            return Ok(z);
        }
        if it == opts.max_iter {
            return Err(Error::NewtonStall {
                step: 0,
                iterations: it,
                residual: res.to_f64_lossy(),
            });
        }
        let lu = lap.banded_shifted(&shift).factor()?;
        lu.solve(&mut r);
        for k in 0..n {
            z[k] = z[k] - r[k];
        }
    }
    unreachable!("loop returns on its last iteration")
}
