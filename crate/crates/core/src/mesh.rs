//! Uniform Dirichlet grids on boxes, the finite-difference Laplacian and
//! its spectrum, and control-region masks.
//!
//! Boundary nodes are eliminated: every vector in the crate lives on the
//! interior nodes only, numbered `k = i + nx * j`. Discrete `L²` inner
//! products carry the cell mass `h_1 ... h_dim`.

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen, BandedLu, BandedMatrix};
use crate::report::{Cell, CsvTable};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh<T> {
    dim: usize,
    extents: [T; 2],
    counts: [usize; 2],
    spacing: [T; 2],
}

impl<T: Scalar> SpatialMesh<T> {
    /// Builds a uniform grid with `counts[a]` interior nodes on `(0, extents[a])`.
    pub fn new(dim: usize, extents: &[T], counts: &[usize]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return invalid(format!("mesh dimension must be 1 or 2, got {dim}"));
        }
        if extents.len() != dim || counts.len() != dim {
            return invalid(format!(
                "expected {dim} extents and counts, got {} and {}",
                extents.len(),
                counts.len()
            ));
        }
        let mut e = [T::one(); 2];
        let mut c = [1usize; 2];
        let mut h = [T::one(); 2];
        for a in 0..dim {
            if !(extents[a] > T::zero()) || !extents[a].is_finite() {
                return invalid(format!("extent on axis {a} must be positive, got {}", extents[a]));
            }
            if counts[a] < 3 {
                return invalid(format!("axis {a} needs at least 3 interior nodes, got {}", counts[a]));
            }
            e[a] = extents[a];
            c[a] = counts[a];
            h[a] = extents[a] / T::from_usize_lossy(counts[a] + 1);
        }
        Ok(Self {
            dim,
            extents: e,
            counts: c,
            spacing: h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[T] {
        &self.extents[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing[..self.dim]
    }

    pub fn dof(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    /// Offset between neighbouring nodes along the slowest axis.
    pub fn max_stride(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.counts[0]
        }
    }

    /// Quadrature weight of one node: `h_1 ... h_dim`.
    pub fn mass(&self) -> T {
        self.spacing().iter().fold(T::one(), |m, &h| m * h)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.counts[0] * j
    }

    /// Per-axis grid indices of node `k`.
    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        [k % self.counts[0], k / self.counts[0]]
    }

    /// Physical coordinates of node `k` (second entry is zero in 1D).
    pub fn coords(&self, k: usize) -> [T; 2] {
        let [i, j] = self.multi_index(k);
        let x = T::from_usize_lossy(i + 1) * self.spacing[0];
        let y = if self.dim == 2 {
            T::from_usize_lossy(j + 1) * self.spacing[1]
        } else {
            T::zero()
        };
        [x, y]
    }

    /// Evaluates `f` at every interior node.
    pub fn sample(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        (0..self.dof()).map(|k| f(self.coords(k))).collect()
    }

    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        self.mass() * dot(u, v)
    }

    pub fn norm(&self, u: &[T]) -> T {
        self.inner(u, u).sqrt()
    }

    /// Mass-weighted inner product restricted to nodes where `mask` holds.
    pub fn inner_masked(&self, u: &[T], v: &[T], mask: &[bool]) -> T {
        let s = u
            .iter()
            .zip(v)
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold(T::zero(), |acc, ((&a, &b), _)| acc + a * b);
        self.mass() * s
    }
}

/// Five-point (three-point in 1D) Dirichlet Laplacian `A ≈ -Δ`.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian<T> {
    mesh: SpatialMesh<T>,
    inv_h2: [T; 2],
    mu1: T,
    first: Vec<T>,
    basis: Option<Eigenbasis<T>>,
}

/// Full eigen-decomposition `A h_j = mu_j h_j`, orthonormal in the mass
/// inner product, ascending in `mu_j`.
#[derive(Debug, Clone)]
pub struct Eigenbasis<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> DiscreteLaplacian<T> {
    /// Assembles the operator and computes `mu_1` and its eigenvector by
    /// inverse iteration.
    pub fn assemble(mesh: &SpatialMesh<T>) -> Result<Self> {
        let mut inv_h2 = [T::zero(); 2];
        for (a, &h) in mesh.spacing().iter().enumerate() {
            inv_h2[a] = T::one() / (h * h);
        }
        let mut lap = Self {
            mesh: mesh.clone(),
            inv_h2,
            mu1: T::zero(),
            first: Vec::new(),
            basis: None,
        };
        let (mu1, first) = lap.inverse_iteration(T::zero())?;
        lap.mu1 = mu1;
        lap.first = first;
        Ok(lap)
    }

    /// Same as [`assemble`](Self::assemble) plus the full eigenbasis.
    pub fn assemble_with_basis(mesh: &SpatialMesh<T>) -> Result<Self> {
        let mut lap = Self::assemble(mesh)?;
        lap.compute_basis()?;
        Ok(lap)
    }

    pub fn mesh(&self) -> &SpatialMesh<T> {
        &self.mesh
    }

    pub fn dof(&self) -> usize {
        self.mesh.dof()
    }

    /// Smallest eigenvalue `mu_1^h`.
    pub fn mu1(&self) -> T {
        self.mu1
    }

    /// First eigenvector, unit mass-norm, strictly positive.
    pub fn first_eigenvector(&self) -> &[T] {
        &self.first
    }

    pub fn basis(&self) -> Option<&Eigenbasis<T>> {
        self.basis.as_ref()
    }

    pub fn diagonal(&self) -> T {
        let two = T::lit(2.0);
        (0..self.mesh.dim()).fold(T::zero(), |s, a| s + two * self.inv_h2[a])
    }

    /// `out = A u`
    pub fn apply_into(&self, u: &[T], out: &mut [T]) {
        let [nx, ny] = self.mesh.counts;
        let diag = self.diagonal();
        for j in 0..ny {
            for i in 0..nx {
                let k = i + nx * j;
                let mut acc = diag * u[k];
                if i > 0 {
                    acc = acc - self.inv_h2[0] * u[k - 1];
                }
                if i + 1 < nx {
                    acc = acc - self.inv_h2[0] * u[k + 1];
                }
                if self.mesh.dim() == 2 {
                    if j > 0 {
                        acc = acc - self.inv_h2[1] * u[k - nx];
                    }
                    if j + 1 < ny {
                        acc = acc - self.inv_h2[1] * u[k + nx];
                    }
                }
                out[k] = acc;
            }
        }
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.apply_into(u, &mut out);
        out
    }

    /// Calls `f(row, col, value)` for every stored entry.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, T)) {
        let [nx, ny] = self.mesh.counts;
        let diag = self.diagonal();
        for j in 0..ny {
            for i in 0..nx {
                let k = i + nx * j;
                f(k, k, diag);
                if i > 0 {
                    f(k, k - 1, -self.inv_h2[0]);
                }
                if i + 1 < nx {
                    f(k, k + 1, -self.inv_h2[0]);
                }
                if self.mesh.dim() == 2 {
                    if j > 0 {
                        f(k, k - nx, -self.inv_h2[1]);
                    }
                    if j + 1 < ny {
                        f(k, k + nx, -self.inv_h2[1]);
                    }
                }
            }
        }
    }

    /// `A + diag(shift)` in banded form.
    pub fn banded_shifted(&self, shift: &[T]) -> BandedMatrix<T> {
        let s = self.mesh.max_stride();
        let mut m = BandedMatrix::zeros(self.dof(), s, s);
        self.for_each_entry(|r, c, v| m.add(r, c, v));
        for (k, &d) in shift.iter().enumerate() {
            m.add(k, k, d);
        }
        m
    }

    /// Discrete `H¹₀` seminorm squared, `<A u, u>`.
    pub fn energy(&self, u: &[T]) -> T {
        self.mesh.inner(&self.apply(u), u)
    }

    /// Node-wise squared gradient magnitude by centred differences with
    /// zero boundary values.
    pub fn grad_sq(&self, u: &[T]) -> Vec<T> {
        let [nx, ny] = self.mesh.counts;
        let h = self.mesh.spacing;
        let two = T::lit(2.0);
        let mut out = vec![T::zero(); u.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = i + nx * j;
                let l = if i > 0 { u[k - 1] } else { T::zero() };
                let r = if i + 1 < nx { u[k + 1] } else { T::zero() };
                let gx = (r - l) / (two * h[0]);
                let mut g2 = gx * gx;
                if self.mesh.dim() == 2 {
                    let d = if j > 0 { u[k - nx] } else { T::zero() };
                    let up = if j + 1 < ny { u[k + nx] } else { T::zero() };
                    let gy = (up - d) / (two * h[1]);
                    g2 = g2 + gy * gy;
                }
                out[k] = g2;
            }
        }
        out
    }

    fn residual(&self, mu: T, v: &[T]) -> T {
        let av = self.apply(v);
        let r: Vec<T> = av.iter().zip(v).map(|(&a, &x)| a - mu * x).collect();
        self.mesh.norm(&r)
    }

    fn eigen_tolerance() -> T {
        T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
    }

    fn inverse_iteration(&self, shift: T) -> Result<(T, Vec<T>)> {
        let n = self.dof();
        let shifts = vec![-shift; n];
        let lu: BandedLu<T> = self.banded_shifted(&shifts).factor()?;
        let mut v = vec![T::one(); n];
        let nrm = self.mesh.norm(&v);
        v.iter_mut().for_each(|x| *x = *x / nrm);
        let tol = Self::eigen_tolerance();
        let mut mu = T::zero();
        let mut res = T::infinity();
        for _ in 0..1000 {
            lu.solve(&mut v);
            let nrm = self.mesh.norm(&v);
            v.iter_mut().for_each(|x| *x = *x / nrm);
            mu = self.energy(&v);
            res = self.residual(mu, &v);
            if res <= T::epsilon() * T::lit(16.0) * mu {
                break;
            }
        }
        if !(res <= tol * mu) {
            return Err(Error::EigenNoConvergence {
                residual: res.to_f64_lossy(),
            });
        }
        if v.iter().copied().sum::<T>() < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((mu, v))
    }

    fn compute_basis(&mut self) -> Result<()> {
        let n = self.dof();
        let mut dense = vec![T::zero(); n * n];
        self.for_each_entry(|r, c, v| dense[r * n + c] = dense[r * n + c] + v);
        let eig = symmetric_eigen(n, dense, 100)?;
        let scale = T::one() / self.mesh.mass().sqrt();
        let tol = Self::eigen_tolerance();
        let mut vectors = Vec::with_capacity(n);
        for (j, v) in eig.vectors.into_iter().enumerate() {
            let mut v: Vec<T> = v.into_iter().map(|x| x * scale).collect();
            // Deterministic sign: largest-magnitude entry positive.
            let (mut best, mut sign) = (T::zero(), T::one());
            for &x in &v {
                if x.abs() > best {
                    best = x.abs();
                    sign = x.signum();
                }
            }
            if j == 0 {
                sign = if v.iter().copied().sum::<T>() < T::zero() { -T::one() } else { T::one() };
            }
            v.iter_mut().for_each(|x| *x = *x * sign);
            let mu = eig.values[j];
            let res = self.residual(mu, &v);
            if !(res <= tol * mu) {
                return Err(Error::EigenNoConvergence {
                    residual: res.to_f64_lossy(),
                });
            }
            vectors.push(v);
        }
        self.basis = Some(Eigenbasis {
            values: eig.values,
            vectors,
        });
        Ok(())
    }

    /// Eigenvalue table `(index, eigenvalue)`; the full spectrum when
    /// available, otherwise only `mu_1`.
    pub fn eigen_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["index", "eigenvalue"]);
        match &self.basis {
            Some(b) => {
                for (j, &mu) in b.values.iter().enumerate() {
                    t.push(vec![Cell::from(j + 1), Cell::from(mu.to_f64_lossy())]);
                }
            }
            None => t.push(vec![Cell::from(1usize), Cell::from(self.mu1.to_f64_lossy())]),
        }
        t
    }
}

/// Closed-form 1D eigenvalue `(2/h²)(1 - cos(j π h / L))`.
pub fn eigenvalue_1d<T: Scalar>(j: usize, h: T, length: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    T::lit(2.0) / (h * h) * (T::one() - (T::from_usize_lossy(j) * pi * h / length).cos())
}

/// Axis-aligned sub-box `ω` with an inner box `ω₀ ⋐ ω`, as node masks.
#[derive(Debug, Clone)]
pub struct ControlRegion<T> {
    omega: Vec<(T, T)>,
    omega0: Vec<(T, T)>,
    mask: Vec<bool>,
    mask0: Vec<bool>,
}

impl<T: Scalar> ControlRegion<T> {
    /// Builds the masks. Both boxes must keep a margin of at least one grid
    /// cell to the enclosing set on every axis.
    pub fn new(mesh: &SpatialMesh<T>, omega: &[(T, T)], omega0: &[(T, T)]) -> Result<Self> {
        let dim = mesh.dim();
        if omega.len() != dim || omega0.len() != dim {
            return invalid(format!("control region needs {dim} intervals per box"));
        }
        for a in 0..dim {
            let h = mesh.spacing()[a];
            let len = mesh.extents()[a];
            let (lo, hi) = omega[a];
            let (lo0, hi0) = omega0[a];
            if !(lo < hi) || !(lo0 < hi0) {
                return invalid(format!("empty interval on axis {a}"));
            }
            if lo < h || hi > len - h {
                return invalid(format!(
                    "omega ({lo}, {hi}) on axis {a} must lie inside (0, {len}) with margin {h}"
                ));
            }
            if lo0 < lo + h || hi0 > hi - h {
                return invalid(format!(
                    "omega0 ({lo0}, {hi0}) on axis {a} is not strictly inside omega ({lo}, {hi}) with margin {h}"
                ));
            }
        }
        let inside = |bx: &[(T, T)], p: [T; 2]| {
            (0..dim).all(|a| {
                let tol = T::lit(1e-9) * mesh.spacing()[a];
                p[a] > bx[a].0 + tol && p[a] < bx[a].1 - tol
            })
        };
        let mask: Vec<bool> = (0..mesh.dof()).map(|k| inside(omega, mesh.coords(k))).collect();
        let mask0: Vec<bool> = (0..mesh.dof()).map(|k| inside(omega0, mesh.coords(k))).collect();
        if !mask.iter().any(|&m| m) {
            return invalid("omega contains no grid node");
        }
        if !mask0.iter().any(|&m| m) {
            return invalid("omega0 contains no grid node");
        }
        Ok(Self {
            omega: omega.to_vec(),
            omega0: omega0.to_vec(),
            mask,
            mask0,
        })
    }

    pub fn omega(&self) -> &[(T, T)] {
        &self.omega
    }

    pub fn omega0(&self) -> &[(T, T)] {
        &self.omega0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask0(&self) -> &[bool] {
        &self.mask0
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn node_count0(&self) -> usize {
        self.mask0.iter().filter(|&&m| m).count()
    }

    /// Zeroes `u` outside `ω`.
    pub fn restrict(&self, u: &mut [T]) {
        for (x, &m) in u.iter_mut().zip(&self.mask) {
            if !m {
                *x = T::zero();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport<T> {
    pub mu1: T,
    pub bound: T,
    /// `mu1 - bound`
    pub margin: T,
    pub pass: bool,
    /// Margin within 0.1% of `mu1`.
    pub near_critical: bool,
}

/// Compares a coupling bound `d ≤ μ` with `mu_1^h`.
pub fn check_spectral_condition<T: Scalar>(lap: &DiscreteLaplacian<T>, d_bound: T) -> SpectralReport<T> {
    let mu1 = lap.mu1();
    let margin = mu1 - d_bound;
    SpectralReport {
        mu1,
        bound: d_bound,
        margin,
        pass: margin > T::lit(1e-8) * mu1,
        near_critical: margin.abs() <= T::lit(1e-3) * mu1,
    }
}

impl<T: Scalar> SpectralReport<T> {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Spectral {
                mu1: self.mu1.to_f64_lossy(),
                bound: self.bound.to_f64_lossy(),
                margin: self.margin.to_f64_lossy(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_1d(n: usize) -> SpatialMesh<f64> {
        SpatialMesh::new(1, &[1.0], &[n]).unwrap()
    }

    #[test]
    fn uniform_grid_arithmetic() {
        let m = unit_1d(3);
        assert_eq!(m.spacing()[0], 0.25);
        assert_eq!(m.dof(), 3);
        let m2 = SpatialMesh::<f64>::new(2, &[1.0, 1.0], &[4, 4]).unwrap();
        assert_eq!(m2.dof(), 16);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(SpatialMesh::<f64>::new(1, &[1.0], &[2]).is_err());
        assert!(SpatialMesh::<f64>::new(3, &[1.0; 3], &[4; 3]).is_err());
        assert!(SpatialMesh::<f64>::new(1, &[0.0], &[4]).is_err());
        assert!(SpatialMesh::<f64>::new(1, &[-1.0], &[4]).is_err());
    }

    /// Dense eigenvalues of the 3x3 tridiagonal oracle by the characteristic
    /// polynomial roots: 32 * (2 - sqrt 2), 64, 32 * (2 + sqrt 2).
    #[test]
    fn three_node_first_eigenvalue() {
        let lap = DiscreteLaplacian::assemble(&unit_1d(3)).unwrap();
        let oracle = 16.0 * (2.0 - 2f64.sqrt());
        assert!((lap.mu1() - oracle).abs() < 1e-12);
        assert!((lap.mu1() - 9.372583002030478).abs() < 1e-12);
        assert!((oracle - 32.0 * (1.0 - (PI / 4.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn refinement_approaches_pi_squared_from_below() {
        let mut prev = 0.0;
        for n in [3, 7, 15, 31, 63, 127] {
            let mu = DiscreteLaplacian::assemble(&unit_1d(n)).unwrap().mu1();
            assert!(mu > prev);
            assert!(mu < PI * PI);
            prev = mu;
        }
        assert!((prev - PI * PI).abs() < 1e-3);
    }

    #[test]
    fn zero_maps_to_zero() {
        let lap = DiscreteLaplacian::assemble(&unit_1d(9)).unwrap();
        assert!(lap.apply(&[0.0; 9]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn first_eigenvector_positive_and_normalized() {
        let mesh = SpatialMesh::<f64>::new(2, &[1.0, 2.0], &[6, 9]).unwrap();
        let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
        assert!(lap.first_eigenvector().iter().all(|&x| x > 0.0));
        assert!((mesh.norm(lap.first_eigenvector()) - 1.0).abs() < 1e-12);
        let h = mesh.spacing();
        let exact = eigenvalue_1d(1, h[0], 1.0) + eigenvalue_1d(1, h[1], 2.0);
        assert!((lap.mu1() - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn full_basis_matches_closed_form_1d() {
        let n = 40;
        let mesh = unit_1d(n);
        let lap = DiscreteLaplacian::assemble_with_basis(&mesh).unwrap();
        let b = lap.basis().unwrap();
        let h = mesh.spacing()[0];
        for (j, &mu) in b.values.iter().enumerate() {
            let exact = eigenvalue_1d(j + 1, h, 1.0);
            assert!((mu - exact).abs() <= 1e-10 * exact, "mode {j}: {mu} vs {exact}");
        }
        for i in 0..n {
            for j in 0..n {
                let ip = mesh.inner(&b.vectors[i], &b.vectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-10);
            }
        }
        assert!(b.vectors[0].iter().all(|&x| x > 0.0));
        assert_eq!(lap.eigen_csv().len(), n);
    }

    #[test]
    fn generic_over_f32() {
        let mesh = SpatialMesh::<f32>::new(1, &[1.0], &[15]).unwrap();
        let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
        let exact = eigenvalue_1d(1, mesh.spacing()[0], 1.0);
        assert!((lap.mu1() - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn region_masks_nest() {
        let mesh = unit_1d(99);
        let r = ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.3, 0.4)]).unwrap();
        assert!((28..=31).contains(&r.node_count()));
        assert!(r.node_count0() > 0);
        assert!(r.mask0().iter().zip(r.mask()).all(|(&m0, &m)| !m0 || m));
    }

    #[test]
    fn region_nesting_violations() {
        let mesh = unit_1d(99);
        assert!(ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.1, 0.4)]).is_err());
        assert!(ControlRegion::new(&mesh, &[(0.0, 1.0)], &[(0.3, 0.4)]).is_err());
        // inner box touching omega without a full cell of margin
        assert!(ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.205, 0.4)]).is_err());
    }

    #[test]
    fn spectral_condition_cases() {
        let lap = DiscreteLaplacian::assemble(&unit_1d(999)).unwrap();
        let ok = check_spectral_condition(&lap, 5.0);
        assert!(ok.pass && ok.margin > 4.0);
        let critical = check_spectral_condition(&lap, 9.8696);
        assert!(!critical.pass || critical.near_critical);
        assert!(critical.near_critical);
        let zero = check_spectral_condition(&lap, 0.0);
        assert!(zero.pass);
        assert_eq!(zero.margin, lap.mu1());
        assert!(critical.into_result().is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_poincare(u in proptest::collection::vec(-1.0f64..1.0, 35),
                                  w in proptest::collection::vec(-1.0f64..1.0, 35)) {
            let mesh = SpatialMesh::<f64>::new(2, &[1.0, 1.5], &[5, 7]).unwrap();
            let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
            let au = lap.apply(&u);
            let aw = lap.apply(&w);
            let l = mesh.inner(&au, &w);
            let r = mesh.inner(&u, &aw);
            let scale = mesh.norm(&au) * mesh.norm(&w) + 1e-300;
            prop_assert!((l - r).abs() <= 1e-12 * scale);
            let uu = mesh.inner(&u, &u);
            prop_assert!(mesh.inner(&au, &u) >= lap.mu1() * uu * (1.0 - 1e-12));
        }
    }
}
