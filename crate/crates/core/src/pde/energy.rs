use crate::mesh::DiscreteLaplacian;
use crate::scalar::Scalar;

use super::{ControlField, Trajectory};

/// Empirical constants of the discrete energy estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub delta: f64,
    /// `1 - (μ + δ)/μ₁`
    pub kappa: f64,
    /// Smallest `C_δ` making the integrated estimate hold at every node.
    pub c_delta: f64,
    /// Smallest constant in `‖zⁿ‖_{H¹} ≤ C(‖yⁿ‖ + ‖wⁿ‖)`; 0 when `ε > 0`.
    pub c_z: f64,
    /// Nodes where no finite constant works.
    pub violations: Vec<usize>,
    /// `‖yⁿ‖` never increases.
    pub monotone_decay: bool,
    pub lhs: Vec<f64>,
    pub rhs_base: Vec<f64>,
    pub rhs_budget: Vec<f64>,
}

impl EnergyReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.c_delta.is_finite() && self.c_z.is_finite()
    }
}

/// Evaluates
///
/// ```text
/// ½‖yⁿ‖² + ε/2‖zⁿ‖² + Σ Δt‖y‖²_{H¹} + κ Σ Δt‖z‖²_{H¹}
///     ≤ ½‖y⁰‖² + ε/2‖z⁰‖² + C_δ (Σ Δt ‖controls‖² + Σ Δt ‖y‖²)
/// ```
///
/// with `δ = 0.1(μ₁ − μ)`, and for `ε = 0` the node-wise elliptic bound
/// on `z`.
/// `controls` may mix placements; their squared norms are summed.
pub fn energy_audit<T: Scalar>(
    lap: &DiscreteLaplacian<T>,
    traj: &Trajectory<T>,
    controls: &[&ControlField<T>],
    mu: T,
    eps: T,
) -> EnergyReport {
    let mesh = lap.mesh();
    let mu1 = lap.mu1().to_f64_lossy();
    let mu = mu.to_f64_lossy();
    let eps = eps.to_f64_lossy();
    let delta = 0.1 * (mu1 - mu);
    let kappa = 1.0 - (mu + delta) / mu1;
    let dt = traj.grid.dt().to_f64_lossy();
    let nodes = traj.grid.node_count();

    let l2 = |u: &[T]| mesh.inner(u, u).to_f64_lossy();
    let h1 = |u: &[T]| lap.energy(u).to_f64_lossy();
    let ctrl_sq = |j: usize| -> f64 { controls.iter().map(|c| l2(c.step(j))).sum() };

    let base = 0.5 * l2(traj.y.at(0)) + 0.5 * eps * l2(traj.z.at(0));
    let mut lhs = Vec::with_capacity(nodes);
    let mut rhs_base = Vec::with_capacity(nodes);
    let mut rhs_budget = Vec::with_capacity(nodes);
    let mut dissipated = 0.0;
    let mut budget = 0.0;
    let mut c_delta = 0.0f64;
    let mut c_z = 0.0f64;
    let mut violations = Vec::new();
    let mut monotone = true;
    let mut prev_norm = l2(traj.y.at(0)).sqrt();
    for n in 0..nodes {
        let (y, z) = (traj.y.at(n), traj.z.at(n));
        let ny = l2(y);
        if n > 0 {
            dissipated += dt * (h1(y) + kappa * h1(z));
            budget += dt * (ctrl_sq(n - 1) + ny);
            let norm = ny.sqrt();
            if norm > prev_norm * (1.0 + 1e-12) + 1e-300 {
                monotone = false;
            }
            prev_norm = norm;
        }
        let l = 0.5 * ny + 0.5 * eps * l2(z) + dissipated;
        lhs.push(l);
        rhs_base.push(base);
        rhs_budget.push(budget);
        let excess = l - base;
        let slack = 1e-12 * l.abs().max(base.abs());
        if excess > slack {
            if budget > 0.0 {
                c_delta = c_delta.max(excess / budget);
            } else {
                violations.push(n);
            }
        }

        if eps > 0.0 {
            continue;
        }
        let zn = h1(z).sqrt();
        let w = if n > 0 { ctrl_sq(n - 1).sqrt() } else { 0.0 };
        let denom = ny.sqrt() + w;
        if zn > 1e-300 {
            if denom > 0.0 {
                c_z = c_z.max(zn / denom);
            } else {
                violations.push(n);
            }
        }
    }
    violations.dedup();
    EnergyReport {
        delta,
        kappa,
        c_delta,
        c_z,
        violations,
        monotone_decay: monotone,
        lhs,
        rhs_base,
        rhs_budget,
    }
}
