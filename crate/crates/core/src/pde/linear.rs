use crate::error::{invalid, Error, Result};
use crate::linalg::{BandedLu, BandedMatrix};
use crate::mesh::DiscreteLaplacian;
use crate::scalar::Scalar;

use super::{CoefficientSet, ControlField, NodalSeries, Placement, Source, TimeGrid, Trajectory};

/// Assembles the interleaved block matrix
///
/// ```text
/// [ I/Δt + A - diag(a)   -diag(b)              ]
/// [ -diag(c)             A - diag(d) + (ε/Δt)I ]
/// ```
///
/// with `y_k` at row `2k` and `z_k` at row `2k+1`.
pub fn assemble_block<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    dt: T,
    eps: T,
    a: &[T],
    b: &[T],
    c: &[T],
    d: &[T],
) -> BandedMatrix<T> {
    let n = lap.dof();
    let bw = 2 * lap.mesh().max_stride();
    let mut m = BandedMatrix::zeros(2 * n, bw, bw);
    lap.for_each_entry(|r, col, v| {
        m.add(2 * r, 2 * col, v);
        m.add(2 * r + 1, 2 * col + 1, v);
    });
    let inv_dt = T::one() / dt;
    let eps_dt = eps / dt;
    for k in 0..n {
        m.add(2 * k, 2 * k, inv_dt - a[k]);
        m.add(2 * k, 2 * k + 1, -b[k]);
        m.add(2 * k + 1, 2 * k, -c[k]);
        m.add(2 * k + 1, 2 * k + 1, eps_dt - d[k]);
    }
    m
}

/// Factorizations of the per-step block matrices.
#[derive(Debug, Clone)]
pub enum StepCache<T> {
    /// Time-independent coefficients: one factorization for every step.
    Single(BandedLu<T>),
    /// Entry `j` factors the matrix of step `j -> j+1`.
    PerStep(Vec<BandedLu<T>>),
    /// Too large to keep; factor on every use.
    Lazy,
}

/// Budget for cached per-step factorizations, in scalars.
const CACHE_BUDGET: usize = 1 << 26;

/// Linear coupled system on fixed grids with the relaxation mass `ε ≥ 0`
/// (`ε = 0` is the parabolic-elliptic case).
#[derive(Debug, Clone)]
pub struct CoupledSystem<'a, T: Scalar> {
    lap: &'a DiscreteLaplacian<T>,
    coeffs: &'a CoefficientSet<T>,
    grid: TimeGrid<T>,
    eps: T,
    cache: StepCache<T>,
}

impl<'a, T: Scalar> CoupledSystem<'a, T> {
    pub fn new(lap: &'a DiscreteLaplacian<T>, coeffs: &'a CoefficientSet<T>, grid: TimeGrid<T>, eps: T) -> Result<Self> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return invalid(format!("relaxation eps must be >= 0, got {eps}"));
        }
        coeffs.validate(lap, &grid)?;
        let mut sys = Self {
            lap,
            coeffs,
            grid,
            eps,
            cache: StepCache::Lazy,
        };
        sys.cache = if coeffs.is_time_independent() {
            StepCache::Single(sys.step_matrix(0).factor().map_err(|e| sys.singular(e))?)
        } else {
            let per = 2 * lap.dof() * (3 * 2 * lap.mesh().max_stride() + 1);
            if per * grid.steps() <= CACHE_BUDGET {
                let mut v = Vec::with_capacity(grid.steps());
                for j in 0..grid.steps() {
                    v.push(sys.step_matrix(j).factor().map_err(|e| sys.singular(e))?);
                }
                StepCache::PerStep(v)
            } else {
                StepCache::Lazy
            }
        };
        Ok(sys)
    }

    fn singular(&self, e: Error) -> Error {
        let margin = self.lap.mu1() - self.coeffs.mu;
        match e {
            Error::Singular { context } => Error::Singular {
                context: format!("{context}; spectral margin {margin}"),
            },
            other => other,
        }
    }

    pub fn laplacian(&self) -> &'a DiscreteLaplacian<T> {
        self.lap
    }

    pub fn coefficients(&self) -> &'a CoefficientSet<T> {
        self.coeffs
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn dof(&self) -> usize {
        self.lap.dof()
    }

    /// Block matrix of step `j -> j+1` (coefficients at node `j+1`).
    pub fn step_matrix(&self, j: usize) -> BandedMatrix<T> {
        let n = self.dof();
        let node = j + 1;
        let c = self.coeffs;
        assemble_block(
            self.lap,
            self.grid.dt(),
            self.eps,
            &c.a.at_node(node, n),
            &c.b.at_node(node, n),
            &c.c.at_node(node, n),
            &c.d.at_node(node, n),
        )
    }

    fn with_lu<R>(&self, j: usize, f: impl FnOnce(&BandedLu<T>) -> R) -> Result<R> {
        match &self.cache {
            StepCache::Single(lu) => Ok(f(lu)),
            StepCache::PerStep(v) => Ok(f(&v[j])),
            StepCache::Lazy => {
                let lu = self.step_matrix(j).factor().map_err(|e| self.singular(e))?;
                Ok(f(&lu))
            }
        }
    }

    /// Solves `(A - diag(d^n)) z = rhs`.
    pub fn elliptic_solve(&self, node: usize, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.dof();
        let shift: Vec<T> = self.coeffs.d.at_node(node, n).iter().map(|&d| -d).collect();
        let lu = self.lap.banded_shifted(&shift).factor().map_err(|e| self.singular(e))?;
        let mut z = rhs.to_vec();
        lu.solve(&mut z);
        Ok(z)
    }

    fn initial_z(&self, y0: &[T], z0: Option<&[T]>) -> Result<Vec<T>> {
        let n = self.dof();
        if self.eps > T::zero() {
            match z0 {
                Some(z) if z.len() == n => Ok(z.to_vec()),
                Some(z) => invalid(format!("z0 has {} entries, mesh has {n}", z.len())),
                None => invalid("relaxed system (eps > 0) needs an initial z0"),
            }
        } else {
            let rhs: Vec<T> = (0..n).map(|k| self.coeffs.c.value(0, k) * y0[k]).collect();
            self.elliptic_solve(0, &rhs)
        }
    }

    /// Forward implicit Euler. `z0` is required when `ε > 0` and ignored
    /// otherwise (the elliptic row fixes it).
    pub fn forward(
        &self,
        y0: &[T],
        z0: Option<&[T]>,
        control: Option<&ControlField<T>>,
        source: Option<&Source<T>>,
    ) -> Result<Trajectory<T>> {
        let n = self.dof();
        if y0.len() != n {
            return invalid(format!("y0 has {} entries, mesh has {n}", y0.len()));
        }
        if let Some(c) = control {
            if c.steps() != self.grid.steps() || c.values().dof() != n {
                return invalid("control shape does not match the grids");
            }
        }
        let mut traj = Trajectory::zeros(self.grid, n);
        traj.y.at_mut(0).copy_from_slice(y0);
        let z_init = self.initial_z(y0, z0)?;
        traj.z.at_mut(0).copy_from_slice(&z_init);
        let inv_dt = T::one() / self.grid.dt();
        let eps_dt = self.eps * inv_dt;
        let mut rhs = vec![T::zero(); 2 * n];
        for j in 0..self.grid.steps() {
            {
                let (y, z) = (traj.y.at(j), traj.z.at(j));
                for k in 0..n {
                    rhs[2 * k] = y[k] * inv_dt;
                    rhs[2 * k + 1] = z[k] * eps_dt;
                }
            }
            if let Some(c) = control {
                let off = match c.placement() {
                    Placement::InParabolic => 0,
                    Placement::InElliptic => 1,
                };
                for (k, &g) in c.step(j).iter().enumerate() {
                    rhs[2 * k + off] = rhs[2 * k + off] + g;
                }
            }
            add_source(&mut rhs, source, j);
            self.with_lu(j, |lu| lu.solve(&mut rhs))?;
            let (yn, zn) = (j + 1, j + 1);
            for k in 0..n {
                traj.y.at_mut(yn)[k] = rhs[2 * k];
                traj.z.at_mut(zn)[k] = rhs[2 * k + 1];
            }
        }
        Ok(traj)
    }

    /// Exact discrete adjoint. The terminal pairing vector `(p, q)` enters
    /// through the last step as `(p/Δt, q/Δt)`; entries `0..N` of the
    /// result satisfy
    ///
    /// ```text
    /// <y^N, p> + <z^N, q> - <y^0, φ^0> - ε<z^0, ψ^0> = Δt Σ_j <g_j, Φ^j>
    /// ```
    ///
    /// for every forward run with step controls `g_j`. For `ε > 0` pass
    /// `q = ε ψ_T`. Node `N` holds `(p, q/ε)` (or, at `ε = 0`, the
    /// elliptic adjoint row solved with `p`).
    pub fn adjoint(&self, p: &[T], q: Option<&[T]>, source: Option<&Source<T>>) -> Result<Trajectory<T>> {
        let n = self.dof();
        if p.len() != n || q.is_some_and(|q| q.len() != n) {
            return invalid("adjoint terminal data do not match the mesh");
        }
        let steps = self.grid.steps();
        let mut traj = Trajectory::zeros(self.grid, n);
        traj.y.at_mut(steps).copy_from_slice(p);
        let psi_t = if self.eps > T::zero() {
            q.map_or_else(|| vec![T::zero(); n], |q| q.iter().map(|&x| x / self.eps).collect())
        } else {
            let rhs: Vec<T> = (0..n).map(|k| self.coeffs.b.value(steps, k) * p[k]).collect();
            self.elliptic_solve(steps, &rhs)?
        };
        traj.z.at_mut(steps).copy_from_slice(&psi_t);

        let inv_dt = T::one() / self.grid.dt();
        let eps_dt = self.eps * inv_dt;
        let mut rhs = vec![T::zero(); 2 * n];
        for k in 0..n {
            rhs[2 * k] = p[k] * inv_dt;
            rhs[2 * k + 1] = q.map_or(T::zero(), |q| q[k] * inv_dt);
        }
        for j in (0..steps).rev() {
            add_source(&mut rhs, source, j);
            self.with_lu(j, |lu| lu.solve_transpose(&mut rhs))?;
            for k in 0..n {
                traj.y.at_mut(j)[k] = rhs[2 * k];
                traj.z.at_mut(j)[k] = rhs[2 * k + 1];
            }
            for k in 0..n {
                rhs[2 * k] = rhs[2 * k] * inv_dt;
                rhs[2 * k + 1] = rhs[2 * k + 1] * eps_dt;
            }
        }
        Ok(traj)
    }

    /// Recomputes `z^n` from `y^n` through the elliptic row (`ε = 0`).
    pub fn recompute_z(&self, y: &NodalSeries<T>, control: Option<&ControlField<T>>) -> Result<NodalSeries<T>> {
        if self.eps != T::zero() {
            return invalid("z is only slaved to y when eps = 0");
        }
        let n = self.dof();
        let mut z = NodalSeries::zeros(y.count(), n);
        for node in 0..y.count() {
            let mut rhs: Vec<T> = (0..n).map(|k| self.coeffs.c.value(node, k) * y.at(node)[k]).collect();
            if let Some(c) = control {
                if node > 0 && c.placement() == Placement::InElliptic {
                    for (r, &w) in rhs.iter_mut().zip(c.step(node - 1)) {
                        *r = *r + w;
                    }
                }
            }
            z.at_mut(node).copy_from_slice(&self.elliptic_solve(node, &rhs)?);
        }
        Ok(z)
    }
}

fn add_source<T: Scalar>(rhs: &mut [T], source: Option<&Source<T>>, j: usize) {
    let Some(s) = source else { return };
    if let Some(sy) = &s.y {
        for (k, &v) in sy.at(j).iter().enumerate() {
            rhs[2 * k] = rhs[2 * k] + v;
        }
    }
    if let Some(sz) = &s.z {
        for (k, &v) in sz.at(j).iter().enumerate() {
            rhs[2 * k + 1] = rhs[2 * k + 1] + v;
        }
    }
}

/// Right-hand side of the duality identity minus its left-hand side,
/// relative to the largest term. Used by tests and the acceptance suite.
pub fn duality_residual<T: Scalar>(
    sys: &CoupledSystem<'_, T>,
    forward: &Trajectory<T>,
    adjoint: &Trajectory<T>,
    p: &[T],
    q: Option<&[T]>,
    control: &ControlField<T>,
) -> f64 {
    let mesh = sys.laplacian().mesh();
    let grid = sys.grid();
    let steps = grid.steps();
    let dt = grid.dt().to_f64_lossy();
    let ip = |u: &[T], v: &[T]| mesh.inner(u, v).to_f64_lossy();
    let mut terms = vec![ip(forward.y.at(steps), p)];
    if let Some(q) = q {
        terms.push(ip(forward.z.at(steps), q));
    }
    terms.push(-ip(forward.y.at(0), adjoint.y.at(0)));
    terms.push(-sys.eps().to_f64_lossy() * ip(forward.z.at(0), adjoint.z.at(0)));
    for j in 0..steps {
        let obs = match control.placement() {
            Placement::InParabolic => adjoint.y.at(j),
            Placement::InElliptic => adjoint.z.at(j),
        };
        terms.push(-dt * ip(control.step(j), obs));
    }
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let sum: f64 = terms.iter().sum();
    if scale == 0.0 {
        0.0
    } else {
        sum.abs() / scale
    }
}
