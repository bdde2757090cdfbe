//! Carleman weights, weighted functionals and observability quotients.
//!
//! ```text
//! β(t) = t(T - t)         φ = e^{λα₀}/β          ᾱ = e^{kλ} - e^{λα₀}
//! α = ᾱ/β                 ρ(t) = e^{-2K/(T - t)}
//! ```
//!
//! Exponentials such as `e^{-2sα}` underflow on any realistic grid, so the
//! functionals are accumulated in log space with [`LogSum`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use crate::pde::{gaussian_vector, CoupledSystem, NodalSeries, TimeGrid, Trajectory};
use crate::report::{Cell, CsvTable};
use crate::scalar::{LogSum, Scalar};

/// Exponents `(p, q)` of the profile `ξ^p (1-ξ)^q` on one axis, with
/// `ξ = x/L` and critical point `ξ₀ = p/(p+q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeExponents<T> {
    pub p: T,
    pub q: T,
}

impl<T: Scalar> ShapeExponents<T> {
    /// Exponents in `(0, 1]` with critical point `xi0 ∈ (0, 1)`.
    pub fn centered_at(xi0: T) -> Result<Self> {
        if !(xi0 > T::zero() && xi0 < T::one()) {
            return invalid(format!("critical point {xi0} must lie in (0, 1)"));
        }
        let half = T::lit(0.5);
        Ok(if xi0 <= half {
            Self {
                p: xi0 / (T::one() - xi0),
                q: T::one(),
            }
        } else {
            Self {
                p: T::one(),
                q: (T::one() - xi0) / xi0,
            }
        })
    }

    pub fn critical_point(&self) -> T {
        self.p / (self.p + self.q)
    }

    fn profile(&self, xi: T) -> T {
        xi.powf(self.p) * (T::one() - xi).powf(self.q)
    }
}

/// Tensor-product profile normalized so its largest node value is 1.
///
/// Fails unless every axis's critical point lies inside `ω₀` and the
/// discrete maximizer is an `ω₀` node.
pub fn build_alpha0<T: Scalar>(
    mesh: &SpatialMesh<T>,
    region: &ControlRegion<T>,
    exponents: &[ShapeExponents<T>],
) -> Result<Vec<T>> {
    let dim = mesh.dim();
    if exponents.len() != dim {
        return invalid(format!("need {dim} exponent pairs, got {}", exponents.len()));
    }
    for (a, e) in exponents.iter().enumerate() {
        if !(e.p > T::zero() && e.q > T::zero()) {
            return invalid(format!("exponents on axis {a} must be positive"));
        }
        let x0 = e.critical_point() * mesh.extents()[a];
        let (lo, hi) = region.omega0()[a];
        if !(x0 > lo && x0 < hi) {
            return invalid(format!("critical point {x0} on axis {a} lies outside omega0 ({lo}, {hi})"));
        }
    }
    let raw: Vec<T> = (0..mesh.dof())
        .map(|k| {
            let x = mesh.coords(k);
            (0..dim).fold(T::one(), |acc, a| acc * exponents[a].profile(x[a] / mesh.extents()[a]))
        })
        .collect();
    let (arg, &max) = raw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite profile"))
        .expect("non-empty mesh");
    if !region.mask0()[arg] {
        return invalid("discrete maximizer of alpha0 is not an omega0 node");
    }
    let alpha: Vec<T> = raw.into_iter().map(|v| v / max).collect();
    let tol = T::lit(1e-10);
    for k in (0..mesh.dof()).filter(|&k| !region.mask0()[k]) {
        if gradient_sq(mesh, &alpha, k).sqrt() <= tol {
            return invalid(format!("alpha0 has a critical node at {:?} outside omega0", mesh.coords(k)));
        }
    }
    Ok(alpha)
}

/// Centred-difference `|∇u|²` at node `k`, with zero boundary values.
fn gradient_sq<T: Scalar>(mesh: &SpatialMesh<T>, u: &[T], k: usize) -> T {
    let idx = mesh.multi_index(k);
    let mut g = T::zero();
    for a in 0..mesh.dim() {
        let n = mesh.counts()[a];
        let at = |i: isize| -> T {
            if i < 0 || i as usize >= n {
                return T::zero();
            }
            let mut m = idx;
            m[a] = i as usize;
            u[mesh.index(m[0], m[1])]
        };
        let i = idx[a] as isize;
        let d = (at(i + 1) - at(i - 1)) / (T::lit(2.0) * mesh.spacing()[a]);
        g = g + d * d;
    }
    g
}

/// Knobs for [`WeightParams::new`]; defaults `λ = 2`, `σ = 1`,
/// `s = σ(T + T²)`, `k = ‖α₀‖_∞ + ln 2 + 0.1`, `K = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig<T> {
    pub lambda: T,
    pub sigma: T,
    /// `None` selects `s = σ(T + T²)`.
    pub s: Option<T>,
    pub k_margin: T,
    pub big_k: T,
}

impl<T: Scalar> Default for WeightConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(2.0),
            sigma: T::one(),
            s: None,
            k_margin: T::lit(0.1),
            big_k: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightParams<T> {
    pub alpha0: Vec<T>,
    pub alpha0_sup: T,
    pub k: T,
    pub lambda: T,
    pub sigma: T,
    pub s: T,
    pub big_k: T,
    pub t_final: T,
}

impl<T: Scalar> WeightParams<T> {
    pub fn new(alpha0: Vec<T>, t_final: T, cfg: &WeightConfig<T>) -> Result<Self> {
        if alpha0.iter().any(|&a| !(a > T::zero())) {
            return invalid("alpha0 must be positive at every interior node");
        }
        if !(cfg.lambda >= T::zero()) {
            return invalid(format!("weight.lambda must be >= 0, got {}", cfg.lambda));
        }
        if !(cfg.sigma > T::zero()) {
            return invalid(format!("weight.sigma must be > 0, got {}", cfg.sigma));
        }
        if !(cfg.k_margin > T::zero()) {
            return invalid(format!("weight.k_margin must be > 0, got {}", cfg.k_margin));
        }
        if !(cfg.big_k > T::zero()) {
            return invalid(format!("weight.K must be > 0, got {}", cfg.big_k));
        }
        let s_min = cfg.sigma * (t_final + t_final * t_final);
        let s = cfg.s.unwrap_or(s_min);
        if s < s_min {
            return invalid(format!("weight.s = {s} is below sigma (T + T^2) = {s_min}"));
        }
        let sup = crate::scalar::max_abs(&alpha0);
        let k = sup + T::lit(std::f64::consts::LN_2) + cfg.k_margin;
        Ok(Self {
            alpha0,
            alpha0_sup: sup,
            k,
            lambda: cfg.lambda,
            sigma: cfg.sigma,
            s,
            big_k: cfg.big_k,
            t_final,
        })
    }

    /// `ᾱ(x) = e^{kλ} - e^{λα₀(x)}` at interior nodes.
    pub fn alpha_bar(&self) -> Vec<T> {
        let ekl = (self.k * self.lambda).exp();
        self.alpha0.iter().map(|&a| ekl - (self.lambda * a).exp()).collect()
    }

    /// `ᾱ` on the boundary, where `α₀ = 0`.
    pub fn alpha_bar_boundary(&self) -> T {
        (self.k * self.lambda).exp() - T::one()
    }

    pub fn beta(&self, t: T) -> T {
        t * (self.t_final - t)
    }

    /// `ρ(t) = e^{-2K/(T-t)}`, zero at `t = T`.
    pub fn rho(&self, t: T) -> T {
        control_weight(self.big_k, self.t_final, t)
    }
}

pub fn control_weight<T: Scalar>(big_k: T, t_final: T, t: T) -> T {
    if t >= t_final {
        T::zero()
    } else {
        (-T::lit(2.0) * big_k / (t_final - t)).exp()
    }
}

/// `ρ` at the midpoints of every step.
pub fn midpoint_weights<T: Scalar>(big_k: T, grid: &TimeGrid<T>) -> Vec<T> {
    (0..grid.steps())
        .map(|j| control_weight(big_k, grid.t_final(), grid.midpoint(j)))
        .collect()
}

/// Weight fields at a list of times inside `(0, T)`; entry `i` of every
/// vector belongs to `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFields<T> {
    pub times: Vec<T>,
    pub beta: Vec<T>,
    pub phi: NodalSeries<T>,
    pub alpha: NodalSeries<T>,
    pub alpha_hat: Vec<T>,
    pub alpha_star: Vec<T>,
    pub phi_hat: Vec<T>,
    pub phi_star: Vec<T>,
    pub rho: Vec<T>,
}

/// Evaluates the fields at the given times, all of which must lie in
/// `(0, T)`. Extrema run over interior nodes and the boundary, where
/// `α₀ = 0`.
pub fn weight_fields_at<T: Scalar>(params: &WeightParams<T>, times: &[T]) -> Result<WeightFields<T>> {
    let n = params.alpha0.len();
    for &t in times {
        if !(t > T::zero() && t < params.t_final) {
            return invalid(format!("weights are singular at t = {t}; use times inside (0, T)"));
        }
    }
    let abar = params.alpha_bar();
    let abar_b = params.alpha_bar_boundary();
    let e_l: Vec<T> = params.alpha0.iter().map(|&a| (params.lambda * a).exp()).collect();
    let mut phi = NodalSeries::zeros(times.len(), n);
    let mut alpha = NodalSeries::zeros(times.len(), n);
    let (mut ah, mut as_, mut ph, mut ps) = (vec![], vec![], vec![], vec![]);
    for (i, &t) in times.iter().enumerate() {
        let b = params.beta(t);
        let (mut amin, mut amax) = (abar_b / b, abar_b / b);
        let (mut pmin, mut pmax) = (T::one() / b, T::one() / b);
        for k in 0..n {
            let p = e_l[k] / b;
            let a = abar[k] / b;
            phi.at_mut(i)[k] = p;
            alpha.at_mut(i)[k] = a;
            amin = amin.min(a);
            amax = amax.max(a);
            pmin = pmin.min(p);
            pmax = pmax.max(p);
        }
        ah.push(amin);
        as_.push(amax);
        ph.push(pmin);
        ps.push(pmax);
    }
    Ok(WeightFields {
        times: times.to_vec(),
        beta: times.iter().map(|&t| params.beta(t)).collect(),
        phi,
        alpha,
        alpha_hat: ah,
        alpha_star: as_,
        phi_hat: ph,
        phi_star: ps,
        rho: times.iter().map(|&t| params.rho(t)).collect(),
    })
}

/// Fields on the interior nodes `t_1 .. t_{N-1}` of `grid`.
pub fn build_weight_fields<T: Scalar>(params: &WeightParams<T>, grid: &TimeGrid<T>) -> Result<WeightFields<T>> {
    weight_fields_at(params, &grid.interior_nodes())
}

/// Long-format dump `(x, t, beta, phi, alpha, rho)` on interior nodes.
pub fn weight_fields_csv<T: Scalar>(mesh: &SpatialMesh<T>, f: &WeightFields<T>) -> CsvTable {
    let mut t = if mesh.dim() == 1 {
        CsvTable::new(&["x", "t", "beta", "phi", "alpha", "rho"])
    } else {
        CsvTable::new(&["x1", "x2", "t", "beta", "phi", "alpha", "rho"])
    };
    for (i, &time) in f.times.iter().enumerate() {
        for k in 0..mesh.dof() {
            let c = mesh.coords(k);
            let mut row = vec![Cell::from(c[0].to_f64_lossy())];
            if mesh.dim() == 2 {
                row.push(Cell::from(c[1].to_f64_lossy()));
            }
            row.extend([
                Cell::from(time.to_f64_lossy()),
                Cell::from(f.beta[i].to_f64_lossy()),
                Cell::from(f.phi.at(i)[k].to_f64_lossy()),
                Cell::from(f.alpha.at(i)[k].to_f64_lossy()),
                Cell::from(f.rho[i].to_f64_lossy()),
            ]);
            t.push(row);
        }
    }
    t
}

/// Both sides of the two Carleman inequalities, as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanReport {
    /// `ln I(s, λ; φ)`; `-inf` when the integral is zero.
    pub ln_i: f64,
    pub ln_i_tilde: f64,
    /// `ln ∬_ω e^{-4sα̂+2sα*} λ⁸ (sφ*)⁷ |φ|²`
    pub ln_rhs_phi: f64,
    /// `ln ∬_ω e^{-2sα} λ⁸ (sφ)⁷ |ψ|²`
    pub ln_rhs_psi: f64,
}

/// Which observation the quotient uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Phi,
    Psi,
}

impl CarlemanReport {
    pub fn ln_lhs(&self) -> f64 {
        log_add(self.ln_i, self.ln_i_tilde)
    }

    /// `(I + Ĩ) / RHS`, or `None` when the right-hand side vanishes.
    pub fn quotient(&self, side: Observation) -> Option<f64> {
        let rhs = match side {
            Observation::Phi => self.ln_rhs_phi,
            Observation::Psi => self.ln_rhs_psi,
        };
        if rhs == f64::NEG_INFINITY {
            None
        } else {
            Some((self.ln_lhs() - rhs).exp())
        }
    }

    /// `ln` of the quotient; finite whenever both sides are nonzero.
    pub fn ln_quotient(&self, side: Observation) -> Option<f64> {
        let rhs = match side {
            Observation::Phi => self.ln_rhs_phi,
            Observation::Psi => self.ln_rhs_psi,
        };
        (rhs != f64::NEG_INFINITY).then(|| self.ln_lhs() - rhs)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let mut s = LogSum::new();
    s.add_log(a);
    s.add_log(b);
    s.ln()
}

/// Evaluates `I`, `Ĩ` and both localized right-hand sides for an adjoint
/// pair, using interior time nodes, centred time differences and the
/// discrete Laplacian.
pub fn eval_carleman_functionals<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    region: &ControlRegion<T>,
    params: &WeightParams<T>,
    fields: &WeightFields<T>,
    adjoint: &Trajectory<T>,
) -> Result<CarlemanReport> {
    let grid = &adjoint.grid;
    let nodes = grid.node_count();
    if fields.times.len() + 2 != nodes {
        return invalid("weight fields and adjoint trajectory use different time grids");
    }
    let n = lap.dof();
    let mass = lap.mesh().mass().to_f64_lossy();
    let dt = grid.dt().to_f64_lossy();
    let s = params.s.to_f64_lossy();
    let lam = params.lambda.to_f64_lossy();
    let ln_w = (dt * mass).ln();
    let (mut i_sum, mut it_sum, mut rp_sum, mut rs_sum) = (LogSum::new(), LogSum::new(), LogSum::new(), LogSum::new());
    let ln = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    for node in 1..nodes - 1 {
        let i = node - 1;
        let (phi_a, psi_a) = (adjoint.y.at(node), adjoint.z.at(node));
        let lap_phi = lap.apply(phi_a);
        let lap_psi = lap.apply(psi_a);
        let g_phi = lap.grad_sq(phi_a);
        let g_psi = lap.grad_sq(psi_a);
        let (prev, next) = (adjoint.y.at(node - 1), adjoint.y.at(node + 1));
        let a_hat = fields.alpha_hat[i].to_f64_lossy();
        let a_star = fields.alpha_star[i].to_f64_lossy();
        let sp_star = s * fields.phi_star[i].to_f64_lossy();
        let ln_obs_phi = -4.0 * s * a_hat + 2.0 * s * a_star + 8.0 * ln(lam) + 7.0 * sp_star.ln();
        for k in 0..n {
            let sp = s * fields.phi.at(i)[k].to_f64_lossy();
            let base = -2.0 * s * fields.alpha.at(i)[k].to_f64_lossy() + ln_w;
            let f = phi_a[k].to_f64_lossy();
            let ps = psi_a[k].to_f64_lossy();
            let ft = (next[k] - prev[k]).to_f64_lossy() / (2.0 * dt);
            let lf = lap_phi[k].to_f64_lossy();
            let lp = lap_psi[k].to_f64_lossy();
            let bracket_phi =
                (ft * ft + lf * lf) / sp + lam * lam * sp * g_phi[k].to_f64_lossy() + lam.powi(4) * sp.powi(3) * f * f;
            let bracket_psi = lp * lp / sp + lam * lam * sp * g_psi[k].to_f64_lossy() + lam.powi(4) * sp.powi(3) * ps * ps;
            i_sum.add(base, bracket_phi);
            it_sum.add(base, bracket_psi);
            if region.mask()[k] {
                rp_sum.add(ln_obs_phi + ln_w, f * f);
                rs_sum.add(base + 8.0 * ln(lam) + 7.0 * sp.ln(), ps * ps);
            }
        }
    }
    Ok(CarlemanReport {
        ln_i: i_sum.ln(),
        ln_i_tilde: it_sum.ln(),
        ln_rhs_phi: rp_sum.ln(),
        ln_rhs_psi: rs_sum.ln(),
    })
}

/// One Monte-Carlo sample of the observability quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientSample {
    pub seed: u64,
    /// `None` when the denominator fell below `1e-300`.
    pub quotient: Option<f64>,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityStats {
    pub samples: Vec<QuotientSample>,
    pub max: f64,
    pub mean: f64,
    pub min: f64,
    pub discarded: usize,
}

impl ObservabilityStats {
    pub fn csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["seed", "quotient", "denominator"]);
        for s in &self.samples {
            t.push(vec![
                Cell::from(s.seed),
                Cell::from(s.quotient.unwrap_or(f64::NAN)),
                Cell::from(s.denominator),
            ]);
        }
        t
    }
}

/// Quotient `(‖φ(0)‖² + ‖ψ(0 or Δt)‖²) / Σ_j Δt ρ_j ‖obs^j‖²_ω` for one
/// terminal datum. `rho` holds the step-midpoint weights. The `Psi`
/// variant reads `ψ` at `t = Δt` as the surrogate for `limsup_{t→0⁺}`.
pub fn observability_quotient<T: Scalar>(
    sys: &CoupledSystem<'_, T>,
    region: &ControlRegion<T>,
    rho: &[T],
    phi_t: &[T],
    variant: Observation,
) -> Result<(Option<f64>, f64)> {
    let mesh = sys.laplacian().mesh();
    let adj = sys.adjoint(phi_t, None, None)?;
    let grid = sys.grid();
    let sq = |u: &[T]| mesh.inner(u, u).to_f64_lossy();
    let (num, obs): (f64, &NodalSeries<T>) = match variant {
        Observation::Phi => (sq(adj.y.at(0)) + sq(adj.z.at(0)), &adj.y),
        Observation::Psi => (sq(adj.y.at(0)) + sq(adj.z.at(1)), &adj.z),
    };
    let dt = grid.dt().to_f64_lossy();
    let mut den = 0.0;
    for (j, &r) in rho.iter().enumerate().take(grid.steps()) {
        let o = obs.at(j);
        den += dt * r.to_f64_lossy() * mesh.inner_masked(o, o, region.mask()).to_f64_lossy();
    }
    if den < 1e-300 {
        Ok((None, den))
    } else {
        Ok((Some(num / den), den))
    }
}

/// Monte-Carlo over white-noise terminal data. Sample `i` uses seed
/// `seed + i`, so results do not depend on the thread count.
pub fn estimate_observability_quotient<T: Scalar>(
    sys: &CoupledSystem<'_, T>,
    region: &ControlRegion<T>,
    rho: &[T],
    sample_count: usize,
    seed: u64,
    variant: Observation,
) -> Result<ObservabilityStats> {
    if sample_count == 0 {
        return invalid("observability needs at least one sample");
    }
    let n = sys.dof();
    let samples: Vec<QuotientSample> = (0..sample_count)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let phi_t: Vec<T> = gaussian_vector(n, &mut rng);
            let (quotient, denominator) = observability_quotient(sys, region, rho, &phi_t, variant)?;
            Ok(QuotientSample {
                seed: s,
                quotient,
                denominator,
            })
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = samples.iter().filter_map(|s| s.quotient).collect();
    let discarded = samples.len() - kept.len();
    let (max, min, mean) = if kept.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            kept.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            kept.iter().copied().fold(f64::INFINITY, f64::min),
            kept.iter().sum::<f64>() / kept.len() as f64,
        )
    };
    Ok(ObservabilityStats {
        samples,
        max,
        mean,
        min,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_exponents() {
        let e = ShapeExponents::centered_at(0.5f64).unwrap();
        assert_eq!((e.p, e.q), (1.0, 1.0));
        let e = ShapeExponents::centered_at(0.35f64).unwrap();
        assert!((e.critical_point() - 0.35).abs() < 1e-15);
        assert!(ShapeExponents::centered_at(1.0f64).is_err());
    }

    #[test]
    fn control_weight_limits() {
        assert_eq!(control_weight(1.0f64, 0.5, 0.5), 0.0);
        assert!((control_weight(1.0f64, 0.5, 0.0) - (-4.0f64).exp()).abs() < 1e-16);
    }
}
