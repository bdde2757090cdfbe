//! Small dense and banded direct solvers plus a symmetric eigensolver.
//!
//! Everything here works for any [`Scalar`]. Banded LU follows the LAPACK
//! `gbtf2`/`gbtrs` layout: column-major band storage with `kl` extra rows
//! reserved for fill-in from partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            data: vec![T::zero(); ldab * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[T], out: &mut [T]) {
        for (i, oi) in out.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = T::zero();
            for (j, &xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc = acc + self.data[self.idx(i, j)] * xj;
            }
            *oi = acc;
        }
    }

    pub fn transpose_mul_vec(&self, x: &[T], out: &mut [T]) {
        for (j, oj) in out.iter_mut().enumerate().take(self.n) {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let mut acc = T::zero();
            for (i, &xi) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc = acc + self.data[self.idx(i, j)] * xi;
            }
            *oj = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(self) -> Result<BandedLu<T>> {
        BandedLu::new(self)
    }
}

/// Pivoted banded LU factors; solves with the matrix or its transpose.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    m: BandedMatrix<T>,
    ipiv: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    fn new(mut m: BandedMatrix<T>) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let ku = m.ku;
        let kv = kl + ku;
        let ldab = m.ldab;
        let at = |i: usize, j: usize| (kv + i - j) + j * ldab;
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = m.data[at(j, j)].abs();
            for i in 1..=km {
                let v = m.data[at(j + i, j)].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Singular {
                    context: format!("banded LU pivot {j} of {n}"),
                });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    m.data.swap(at(j, c), at(j + jp, c));
                }
            }
            if km > 0 {
                let piv = m.data[at(j, j)];
                for i in 1..=km {
                    let k = at(j + i, j);
                    m.data[k] = m.data[k] / piv;
                }
                for c in (j + 1)..=ju {
                    let u = m.data[at(j, c)];
                    if u != T::zero() {
                        for i in 1..=km {
                            let l = m.data[at(j + i, j)];
                            let k = at(j + i, c);
                            m.data[k] = m.data[k] - l * u;
                        }
                    }
                }
            }
        }
        Ok(Self { m, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kv = self.m.kl + self.m.ku;
        let ldab = self.m.ldab;
        let d = &self.m.data;
        let at = |i: usize, j: usize| (kv + i - j) + j * ldab;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != T::zero() {
                for i in 1..=km {
                    b[j + i] = b[j + i] - d[at(j + i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] = b[j] / d[at(j, j)];
            let bj = b[j];
            if bj != T::zero() {
                for i in j.saturating_sub(kv)..j {
                    b[i] = b[i] - d[at(i, j)] * bj;
                }
            }
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kv = self.m.kl + self.m.ku;
        let ldab = self.m.ldab;
        let d = &self.m.data;
        let at = |i: usize, j: usize| (kv + i - j) + j * ldab;
        for j in 0..n {
            let mut acc = b[j];
            for (i, &bi) in b.iter().enumerate().take(j).skip(j.saturating_sub(kv)) {
                acc = acc - d[at(i, j)] * bi;
            }
            b[j] = acc / d[at(j, j)];
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = kl.min(n - 1 - j);
            let mut acc = b[j];
            for i in 1..=km {
                acc = acc - d[at(j + i, j)] * b[j + i];
            }
            b[j] = acc;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }
}

/// Dense LU with partial pivoting, row-major storage.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    pub fn new(n: usize, mut a: Vec<T>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Singular {
                    context: format!("dense LU pivot {k} of {n}"),
                });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in (k + 1)..n {
                let l = a[i * n + k] / piv;
                a[i * n + k] = l;
                if l != T::zero() {
                    for c in (k + 1)..n {
                        a[i * n + c] = a[i * n + c] - l * a[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for (j, &xj) in x.iter().enumerate().take(i) {
                acc = acc - self.lu[i * n + j] * xj;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for (j, &xj) in x.iter().enumerate().skip(i + 1) {
                acc = acc - self.lu[i * n + j] * xj;
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Unit Euclidean-norm eigenvectors, `vectors[j]` pairs with `values[j]`.
    pub vectors: Vec<Vec<T>>,
}

/// Cyclic Jacobi rotations on a dense symmetric matrix (row-major).
///
/// Slower than tridiagonal QL but delivers small eigenvalues to full
/// relative accuracy, which matters for the low end of a Laplacian
/// spectrum.
pub fn symmetric_eigen<T: Scalar>(n: usize, mut a: Vec<T>, max_sweeps: usize) -> Result<SymmetricEigen<T>> {
    assert_eq!(a.len(), n * n);
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    let frob = a.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let mut converged = n <= 1;
    let two = T::lit(2.0);
    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= eps * eps.sqrt() * frob || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        return Err(Error::EigenNoConvergence {
            residual: off.sqrt().to_f64_lossy(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn random_banded(n: usize, kl: usize, ku: usize, vals: &[f64]) -> BandedMatrix<f64> {
        let mut m = BandedMatrix::zeros(n, kl, ku);
        let mut it = vals.iter().cycle();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.set(i, j, *it.next().unwrap());
            }
        }
        m
    }

    #[test]
    fn banded_solve_needs_pivoting() {
        // Zero leading diagonal forces a row swap at the first step.
        let mut m = BandedMatrix::zeros(3, 1, 1);
        m.set(0, 0, 0.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 1.0);
        m.set(1, 2, 3.0);
        m.set(2, 1, 4.0);
        m.set(2, 2, 1.0);
        let dense = m.to_dense();
        let x = [1.0, -2.0, 0.5];
        let b = dense_mul(&dense, &x);
        let lu = m.factor().unwrap();
        let mut sol = b.clone();
        lu.solve(&mut sol);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_banded_is_reported() {
        let m = BandedMatrix::<f64>::zeros(4, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular { .. })));
    }

    proptest! {
        #[test]
        fn banded_solves_match_dense(
            n in 2usize..12,
            kl in 0usize..3,
            ku in 0usize..3,
            vals in proptest::collection::vec(-1.0f64..1.0, 40),
            x in proptest::collection::vec(-1.0f64..1.0, 12),
        ) {
            let mut m = random_banded(n, kl, ku, &vals);
            // Keep it comfortably non-singular.
            for i in 0..n { m.add(i, i, 4.0); }
            let dense = m.to_dense();
            let x = &x[..n];
            let b = dense_mul(&dense, x);
            let mut bt = vec![0.0; n];
            m.transpose_mul_vec(x, &mut bt);
            let mut mv = vec![0.0; n];
            m.mul_vec(x, &mut mv);
            for (u, v) in mv.iter().zip(&b) { prop_assert!((u - v).abs() < 1e-12); }
            let lu = m.factor().unwrap();
            let mut s = b.clone();
            lu.solve(&mut s);
            for (u, v) in s.iter().zip(x) { prop_assert!((u - v).abs() < 1e-10); }
            let mut st = bt.clone();
            lu.solve_transpose(&mut st);
            for (u, v) in st.iter().zip(x) { prop_assert!((u - v).abs() < 1e-10); }
        }

        #[test]
        fn dense_lu_roundtrip(n in 1usize..8, vals in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let mut a: Vec<f64> = vals[..n * n].to_vec();
            for i in 0..n { a[i * n + i] += 3.0; }
            let x: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
            let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect();
            let lu = DenseLu::new(n, a).unwrap();
            let s = lu.solve(&b);
            for (u, v) in s.iter().zip(&x) { prop_assert!((u - v).abs() < 1e-10); }
        }
    }

    #[test]
    fn jacobi_recovers_tridiagonal_spectrum() {
        let n = 12;
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let eig = symmetric_eigen(n, a.clone(), 50).unwrap();
        for (j, &lam) in eig.values.iter().enumerate() {
            let k = (j + 1) as f64;
            let exact = 2.0 - 2.0 * (k * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((lam - exact).abs() < 1e-13, "{lam} vs {exact}");
            let v = &eig.vectors[j];
            for i in 0..n {
                let av: f64 = (0..n).map(|c| a[i * n + c] * v[c]).sum();
                assert!((av - lam * v[i]).abs() < 1e-12);
            }
        }
    }
}
