//! Implicit-Euler solvers for the coupled parabolic-elliptic system
//!
//! ```text
//!   y_t - Δy = F(y, z) + v 1_ω
//!  εz_t - Δz = f(y, z) + w 1_ω      (ε = 0: elliptic row)
//! ```
//!
//! and its backward adjoint. The adjoint step is the exact transpose of the
//! forward step, so discrete duality identities hold to rounding error.

mod energy;
mod export;
mod linear;
mod semilinear;

pub use energy::{energy_audit, EnergyReport};
pub use export::{read_trajectory_binary, trajectory_csv, write_trajectory_binary, TrajectoryDump, TRAJECTORY_MAGIC};
pub use linear::{assemble_block, duality_residual, CoupledSystem, StepCache};
pub use semilinear::{solve_forward_semilinear, NewtonOptions, SemilinearStats};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use crate::scalar::Scalar;

/// Uniform time grid `t_n = n T / N`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t_final: T,
    steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t_final: T, steps: usize) -> Result<Self> {
        if !(t_final > T::zero()) || !t_final.is_finite() {
            return invalid(format!("final time must be positive, got {t_final}"));
        }
        if steps < 2 {
            return invalid(format!("need at least 2 time steps, got {steps}"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> T {
        self.t_final / T::from_usize_lossy(self.steps)
    }

    pub fn node(&self, n: usize) -> T {
        if n == self.steps {
            self.t_final
        } else {
            T::from_usize_lossy(n) * self.dt()
        }
    }

    /// Midpoint of step `j`, i.e. of `(t_j, t_{j+1})`.
    pub fn midpoint(&self, j: usize) -> T {
        (T::from_usize_lossy(j) + T::lit(0.5)) * self.dt()
    }

    /// Interior nodes `t_1 .. t_{N-1}`.
    pub fn interior_nodes(&self) -> Vec<T> {
        (1..self.steps).map(|n| self.node(n)).collect()
    }

    /// Trapezoid weight of node `n`.
    pub fn trapezoid_weight(&self, n: usize) -> T {
        if n == 0 || n == self.steps {
            self.dt() * T::lit(0.5)
        } else {
            self.dt()
        }
    }
}

/// One spatial vector per time index, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalSeries<T> {
    dof: usize,
    data: Vec<T>,
}

impl<T: Scalar> NodalSeries<T> {
    pub fn zeros(count: usize, dof: usize) -> Self {
        Self {
            dof,
            data: vec![T::zero(); count * dof],
        }
    }

    pub fn from_fn(count: usize, dof: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(count * dof);
        for n in 0..count {
            for k in 0..dof {
                data.push(f(n, k));
            }
        }
        Self { dof, data }
    }

    pub fn from_slices(slices: &[Vec<T>]) -> Self {
        let dof = slices.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(slices.len() * dof);
        for s in slices {
            assert_eq!(s.len(), dof);
            data.extend_from_slice(s);
        }
        Self { dof, data }
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dof).unwrap_or(0)
    }

    pub fn at(&self, n: usize) -> &[T] {
        &self.data[n * self.dof..(n + 1) * self.dof]
    }

    pub fn at_mut(&mut self, n: usize) -> &mut [T] {
        &mut self.data[n * self.dof..(n + 1) * self.dof]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            dof: self.dof,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        Self {
            dof: self.dof,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-T::one()))
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dof: self.dof,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// A coefficient that is constant, space-dependent, or space-time dependent.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T> {
    Constant(T),
    Space(Vec<T>),
    /// One vector per time node `0..=N`.
    SpaceTime(NodalSeries<T>),
}

impl<T: Scalar> Coefficient<T> {
    #[inline]
    pub fn value(&self, n: usize, k: usize) -> T {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Space(v) => v[k],
            Coefficient::SpaceTime(s) => s.at(n)[k],
        }
    }

    pub fn at_node(&self, n: usize, dof: usize) -> Vec<T> {
        (0..dof).map(|k| self.value(n, k)).collect()
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self, Coefficient::SpaceTime(_))
    }

    pub fn as_constant(&self) -> Option<T> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn sup(&self) -> T {
        let fold = |s: &[T]| s.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Space(v) => fold(v),
            Coefficient::SpaceTime(s) => fold(s.as_flat()),
        }
    }

    pub fn sup_abs(&self) -> T {
        match self {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Space(v) => crate::scalar::max_abs(v),
            Coefficient::SpaceTime(s) => s.max_abs(),
        }
    }

    fn check_shape(&self, name: &str, dof: usize, nodes: usize) -> Result<()> {
        match self {
            Coefficient::Constant(c) if !c.is_finite() => invalid(format!("coefficient {name} is not finite")),
            Coefficient::Space(v) if v.len() != dof => {
                invalid(format!("coefficient {name} has {} entries, mesh has {dof}", v.len()))
            }
            Coefficient::SpaceTime(s) if s.dof() != dof || s.count() != nodes => invalid(format!(
                "coefficient {name} is {}x{}, expected {nodes}x{dof}",
                s.count(),
                s.dof()
            )),
            _ => Ok(()),
        }
    }
}

/// Structural hypothesis on the linear coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// `c` a nonzero constant, `b` and `d` independent of time.
    CConst,
    /// `b` a nonzero constant.
    BConst,
    General,
}

/// Coefficients of `y_t - Δy = a y + b z`, `-Δz = c y + d z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet<T> {
    pub a: Coefficient<T>,
    pub b: Coefficient<T>,
    pub c: Coefficient<T>,
    pub d: Coefficient<T>,
    pub hypothesis: Hypothesis,
    /// Bound with `sup d ≤ mu < mu_1^h`.
    pub mu: T,
}

impl<T: Scalar> CoefficientSet<T> {
    /// Constant coefficients with `mu = d`.
    pub fn constant(a: T, b: T, c: T, d: T, hypothesis: Hypothesis) -> Self {
        Self {
            a: Coefficient::Constant(a),
            b: Coefficient::Constant(b),
            c: Coefficient::Constant(c),
            d: Coefficient::Constant(d),
            hypothesis,
            mu: d,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.a.is_time_independent()
            && self.b.is_time_independent()
            && self.c.is_time_independent()
            && self.d.is_time_independent()
    }

    /// Checks shapes, the hypothesis tag and `sup d ≤ mu < mu_1^h`.
    pub fn validate(&self, lap: &DiscreteLaplacian<T>, grid: &TimeGrid<T>) -> Result<()> {
        let dof = lap.dof();
        let nodes = grid.node_count();
        self.a.check_shape("a", dof, nodes)?;
        self.b.check_shape("b", dof, nodes)?;
        self.c.check_shape("c", dof, nodes)?;
        self.d.check_shape("d", dof, nodes)?;
        match self.hypothesis {
            Hypothesis::CConst => {
                match self.c.as_constant() {
                    Some(c) if c != T::zero() => {}
                    _ => return invalid("hypothesis c_const needs c to be a nonzero constant"),
                }
                if !self.b.is_time_independent() || !self.d.is_time_independent() {
                    return invalid("hypothesis c_const needs b and d independent of time");
                }
            }
            Hypothesis::BConst => match self.b.as_constant() {
                Some(b) if b != T::zero() => {}
                _ => return invalid("hypothesis b_const needs b to be a nonzero constant"),
            },
            Hypothesis::General => {}
        }
        if self.d.sup() > self.mu {
            return invalid(format!("sup d = {} exceeds declared bound mu = {}", self.d.sup(), self.mu));
        }
        crate::mesh::check_spectral_condition(lap, self.mu).into_result()?;
        Ok(())
    }
}

/// Built-in globally Lipschitz scalar nonlinearities vanishing at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity<T> {
    Zero,
    Linear { slope: T },
    Sin { scale: T },
    Arctan { scale: T },
    Tanh { scale: T },
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn value(&self, s: T) -> T {
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Linear { slope } => slope * s,
            Nonlinearity::Sin { scale } => scale * s.sin(),
            Nonlinearity::Arctan { scale } => scale * s.atan(),
            Nonlinearity::Tanh { scale } => scale * s.tanh(),
        }
    }

    pub fn derivative(&self, s: T) -> T {
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Linear { slope } => slope,
            Nonlinearity::Sin { scale } => scale * s.cos(),
            Nonlinearity::Arctan { scale } => scale / (T::one() + s * s),
            Nonlinearity::Tanh { scale } => {
                let t = s.tanh();
                scale * (T::one() - t * t)
            }
        }
    }

    pub fn lipschitz(&self) -> T {
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Linear { slope } => slope.abs(),
            Nonlinearity::Sin { scale } | Nonlinearity::Arctan { scale } | Nonlinearity::Tanh { scale } => {
                scale.abs()
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Zero | Nonlinearity::Linear { .. })
    }

    /// Frozen-coefficient quotient `G(s)/s`, with `G'(0)` where `|s| ≤ tau`.
    pub fn quotient(&self, s: T, tau: T) -> T {
        if s.abs() > tau {
            self.value(s) / s
        } else {
            self.derivative(T::zero())
        }
    }
}

/// Separated nonlinearity `F = F0(y) + b z`, `f = f0(y) + d z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSpec<T> {
    pub big_f: Nonlinearity<T>,
    pub small_f: Nonlinearity<T>,
    pub b: T,
    pub d: T,
}

impl<T: Scalar> NonlinearSpec<T> {
    pub fn validate(&self, lap: &DiscreteLaplacian<T>) -> Result<()> {
        for (name, g) in [("F0", self.big_f), ("f0", self.small_f)] {
            if g.value(T::zero()) != T::zero() {
                return invalid(format!("{name}(0) must vanish"));
            }
            let l = g.lipschitz();
            // Deterministic spot check of the declared Lipschitz constant.
            for i in 0..64 {
                let s1 = T::lit(-8.0 + 0.25 * i as f64);
                let s2 = T::lit(0.37 * (i as f64).sin() * 5.0);
                if s1 == s2 {
                    continue;
                }
                let lhs = (g.value(s1) - g.value(s2)).abs();
                if lhs > l * (s1 - s2).abs() * (T::one() + T::lit(1e-6)) {
                    return invalid(format!("{name} violates its Lipschitz bound {l}"));
                }
            }
        }
        crate::mesh::check_spectral_condition(lap, self.d).into_result()?;
        Ok(())
    }
}

/// Node-wise reaction terms and their partial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ReactionValue<T> {
    pub fy: T,
    pub fy_y: T,
    pub fy_z: T,
    pub fz: T,
    pub fz_y: T,
    pub fz_z: T,
}

/// Right-hand sides `F(y, z)` and `f(y, z)` evaluated node by node.
pub trait Reaction<T: Scalar>: Sync {
    /// `n` is the time node, `k` the spatial node.
    fn eval(&self, n: usize, k: usize, y: T, z: T) -> ReactionValue<T>;

    /// Whether `f` is affine in `y` and `z` with no `y`-dependence of the
    /// slope (the initial elliptic solve is then linear).
    fn elliptic_is_linear(&self) -> bool;
}

impl<T: Scalar> Reaction<T> for CoefficientSet<T> {
    #[inline]
    fn eval(&self, n: usize, k: usize, y: T, z: T) -> ReactionValue<T> {
        let (a, b, c, d) = (self.a.value(n, k), self.b.value(n, k), self.c.value(n, k), self.d.value(n, k));
        ReactionValue {
            fy: a * y + b * z,
            fy_y: a,
            fy_z: b,
            fz: c * y + d * z,
            fz_y: c,
            fz_z: d,
        }
    }

    fn elliptic_is_linear(&self) -> bool {
        true
    }
}

impl<T: Scalar> Reaction<T> for NonlinearSpec<T> {
    #[inline]
    fn eval(&self, _n: usize, _k: usize, y: T, z: T) -> ReactionValue<T> {
        ReactionValue {
            fy: self.big_f.value(y) + self.b * z,
            fy_y: self.big_f.derivative(y),
            fy_z: self.b,
            fz: self.small_f.value(y) + self.d * z,
            fz_y: self.small_f.derivative(y),
            fz_z: self.d,
        }
    }

    fn elliptic_is_linear(&self) -> bool {
        true
    }
}

/// Which equation the control acts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// `v` in the parabolic row.
    InParabolic,
    /// `w` in the elliptic (or ε-parabolic) row.
    InElliptic,
}

/// Distributed control supported in `ω`.
///
/// Entry `j` of the series is the control applied over step `(t_j, t_{j+1}]`,
/// so there are `N` entries for `N` time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField<T> {
    placement: Placement,
    values: NodalSeries<T>,
}

impl<T: Scalar> ControlField<T> {
    pub fn zeros(placement: Placement, grid: &TimeGrid<T>, dof: usize) -> Self {
        Self {
            placement,
            values: NodalSeries::zeros(grid.steps(), dof),
        }
    }

    /// Wraps `values`, rejecting any nonzero entry outside `ω`.
    pub fn new(placement: Placement, values: NodalSeries<T>, region: &ControlRegion<T>) -> Result<Self> {
        for j in 0..values.count() {
            if values.at(j).iter().zip(region.mask()).any(|(&v, &m)| !m && v != T::zero()) {
                return invalid(format!("control has support outside omega at step {j}"));
            }
        }
        Ok(Self { placement, values })
    }

    /// Wraps `values` after zeroing them outside `ω`.
    pub fn restricted(placement: Placement, mut values: NodalSeries<T>, region: &ControlRegion<T>) -> Self {
        for j in 0..values.count() {
            region.restrict(values.at_mut(j));
        }
        Self { placement, values }
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn values(&self) -> &NodalSeries<T> {
        &self.values
    }

    pub fn step(&self, j: usize) -> &[T] {
        self.values.at(j)
    }

    pub fn steps(&self) -> usize {
        self.values.count()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            placement: self.placement,
            values: self.values.scaled(s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.placement, other.placement);
        Self {
            placement: self.placement,
            values: self.values.add(&other.values),
        }
    }

    /// `‖·‖_{L²(ω×(0,T))}` with rectangle rule over steps.
    pub fn l2_norm(&self, mesh: &SpatialMesh<T>, grid: &TimeGrid<T>) -> T {
        let s = (0..self.steps())
            .map(|j| {
                let v = self.step(j);
                mesh.inner(v, v)
            })
            .fold(T::zero(), |a, b| a + b);
        (s * grid.dt()).sqrt()
    }

    /// Per-step spatial norms `‖v(·, t_{j+1})‖`.
    pub fn step_norms(&self, mesh: &SpatialMesh<T>) -> Vec<T> {
        (0..self.steps()).map(|j| mesh.norm(self.step(j))).collect()
    }

    /// `Σ_j Δt ρ_j^{-1} ‖v_j‖²`, the weighted norm `∬ e^{2K/(T-t)}|v|²`.
    /// Steps where `ρ_j` underflows must carry a zero control, else the
    /// result is infinite.
    pub fn weighted_norm_sq(&self, mesh: &SpatialMesh<T>, grid: &TimeGrid<T>, rho: &[T]) -> T {
        let mut s = T::zero();
        for j in 0..self.steps() {
            let v = self.step(j);
            let e = mesh.inner(v, v);
            if e == T::zero() {
                continue;
            }
            s = s + e / rho[j];
        }
        s * grid.dt()
    }

    /// Squared `L²(Q)` distance to another control.
    pub fn distance(&self, other: &Self, mesh: &SpatialMesh<T>, grid: &TimeGrid<T>) -> T {
        let diff = ControlField {
            placement: self.placement,
            values: self.values.sub(&other.values),
        };
        diff.l2_norm(mesh, grid)
    }
}

/// Full-domain source terms added to the right-hand side, indexed by step.
#[derive(Debug, Clone, Default)]
pub struct Source<T> {
    pub y: Option<NodalSeries<T>>,
    pub z: Option<NodalSeries<T>>,
}

/// States `(y, z)` (or adjoint states `(φ, ψ)`) on every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub y: NodalSeries<T>,
    pub z: NodalSeries<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn zeros(grid: TimeGrid<T>, dof: usize) -> Self {
        Self {
            grid,
            y: NodalSeries::zeros(grid.node_count(), dof),
            z: NodalSeries::zeros(grid.node_count(), dof),
        }
    }

    pub fn terminal_y(&self) -> &[T] {
        self.y.at(self.grid.steps())
    }

    pub fn terminal_z(&self) -> &[T] {
        self.z.at(self.grid.steps())
    }

    pub fn y_norms(&self, mesh: &SpatialMesh<T>) -> Vec<T> {
        (0..self.grid.node_count()).map(|n| mesh.norm(self.y.at(n))).collect()
    }

    pub fn z_norms(&self, mesh: &SpatialMesh<T>) -> Vec<T> {
        (0..self.grid.node_count()).map(|n| mesh.norm(self.z.at(n))).collect()
    }

    /// Discrete `H¹₀` norms of `z` per node.
    pub fn z_h1_norms(&self, lap: &DiscreteLaplacian<T>) -> Vec<T> {
        (0..self.grid.node_count()).map(|n| lap.energy(self.z.at(n)).sqrt()).collect()
    }

    /// Trapezoid `L²(Q)` norm of `y - other.y`.
    pub fn y_distance(&self, other: &Self, mesh: &SpatialMesh<T>) -> T {
        l2q_distance(&self.y, &other.y, mesh, &self.grid)
    }

    pub fn y_l2q(&self, mesh: &SpatialMesh<T>) -> T {
        l2q_norm(&self.y, mesh, &self.grid)
    }
}

/// Trapezoid-in-time `L²(Q)` norm of a nodal series.
pub fn l2q_norm<T: Scalar>(u: &NodalSeries<T>, mesh: &SpatialMesh<T>, grid: &TimeGrid<T>) -> T {
    (0..grid.node_count())
        .map(|n| {
            let v = u.at(n);
            grid.trapezoid_weight(n) * mesh.inner(v, v)
        })
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

pub fn l2q_distance<T: Scalar>(u: &NodalSeries<T>, v: &NodalSeries<T>, mesh: &SpatialMesh<T>, grid: &TimeGrid<T>) -> T {
    l2q_norm(&u.sub(v), mesh, grid)
}

/// Random smooth field `Σ c_{jl} sin(jπx/L) cos(lπt/T)` (tensor modes in
/// 2D), with `|c| ≤ amplitude / (modes²)` so the sup stays below `amplitude`.
pub fn random_smooth_field<T: Scalar, R: Rng>(
    mesh: &SpatialMesh<T>,
    grid: &TimeGrid<T>,
    rng: &mut R,
    amplitude: T,
) -> NodalSeries<T> {
    let pi = std::f64::consts::PI;
    let modes = 3usize;
    let dims = mesh.dim();
    let count = if dims == 1 { modes * modes } else { modes * modes * modes };
    let scale = amplitude.to_f64_lossy() / count as f64;
    let coef: Vec<f64> = (0..count).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    let t_final = grid.t_final().to_f64_lossy();
    NodalSeries::from_fn(grid.node_count(), mesh.dof(), |n, k| {
        let t = grid.node(n).to_f64_lossy();
        let [x, y] = mesh.coords(k);
        let x = x.to_f64_lossy() / mesh.extents()[0].to_f64_lossy();
        let mut s = 0.0;
        let mut idx = 0;
        for j in 1..=modes {
            let sx = (j as f64 * pi * x).cos();
            let sy_modes = if dims == 1 { 1 } else { modes };
            for m in 0..sy_modes {
                let sy = if dims == 1 {
                    1.0
                } else {
                    let yy = y.to_f64_lossy() / mesh.extents()[1].to_f64_lossy();
                    (m as f64 * pi * yy).cos()
                };
                for l in 0..modes {
                    s += coef[idx] * sx * sy * (l as f64 * pi * t / t_final).cos();
                    idx += 1;
                }
            }
        }
        T::lit(s)
    })
}

/// White-noise vector with i.i.d. standard normal nodal values.
pub fn gaussian_vector<T: Scalar, R: Rng>(dof: usize, rng: &mut R) -> Vec<T> {
    use rand_distr::{Distribution, StandardNormal};
    (0..dof)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            T::lit(x)
        })
        .collect()
}
