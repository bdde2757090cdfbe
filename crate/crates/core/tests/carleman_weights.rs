#![allow(clippy::needless_range_loop)]

use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{CoefficientSet, CoupledSystem, Hypothesis, TimeGrid};
use nullctl::weights::{
    build_alpha0, build_weight_fields, eval_carleman_functionals, estimate_observability_quotient,
    midpoint_weights, observability_quotient, weight_fields_at, weight_fields_csv, Observation, ShapeExponents,
    WeightConfig, WeightParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(n: usize) -> (SpatialMesh<f64>, DiscreteLaplacian<f64>) {
    let mesh = SpatialMesh::new(1, &[1.0], &[n]).unwrap();
    let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
    (mesh, lap)
}

fn narrow(mesh: &SpatialMesh<f64>) -> ControlRegion<f64> {
    ControlRegion::new(mesh, &[(0.2, 0.5)], &[(0.3, 0.4)]).unwrap()
}

fn params(mesh: &SpatialMesh<f64>, r: &ControlRegion<f64>, lambda: f64, t: f64) -> WeightParams<f64> {
    let e = ShapeExponents::centered_at(0.35).unwrap();
    let a0 = build_alpha0(mesh, r, &[e]).unwrap();
    let cfg = WeightConfig {
        lambda,
        ..WeightConfig::default()
    };
    WeightParams::new(a0, t, &cfg).unwrap()
}

#[test]
fn alpha0_peaks_inside_omega0() {
    let (mesh, _) = line(99);
    let r = narrow(&mesh);
    let e = ShapeExponents::centered_at(0.35).unwrap();
    let a0 = build_alpha0(&mesh, &r, &[e]).unwrap();
    let (arg, &max) = a0.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(max, 1.0);
    let x = mesh.coords(arg)[0];
    assert!(x > 0.3 && x < 0.4, "argmax at {x}");
    assert!((x - 0.35).abs() <= 0.01 + 1e-12);
    assert!(a0.iter().all(|&v| v > 0.0));
}

#[test]
fn symmetric_profile_peaks_at_centre() {
    let (mesh, _) = line(99);
    let r = ControlRegion::new(&mesh, &[(0.3, 0.7)], &[(0.45, 0.55)]).unwrap();
    let e = ShapeExponents { p: 1.0, q: 1.0 };
    let a0 = build_alpha0(&mesh, &r, &[e]).unwrap();
    for k in 0..mesh.dof() {
        let x = mesh.coords(k)[0];
        assert!((a0[k] - 4.0 * x * (1.0 - x)).abs() < 1e-14);
    }
}

#[test]
fn critical_point_outside_omega0_is_rejected() {
    let (mesh, _) = line(99);
    let r = narrow(&mesh);
    let e = ShapeExponents::centered_at(0.9).unwrap();
    assert!(build_alpha0(&mesh, &r, &[e]).is_err());
}

#[test]
fn two_dimensional_profile() {
    let mesh = SpatialMesh::new(2, &[1.0, 1.0], &[19, 19]).unwrap();
    let r = ControlRegion::new(&mesh, &[(0.2, 0.8), (0.2, 0.8)], &[(0.3, 0.6), (0.3, 0.6)]).unwrap();
    let e = ShapeExponents::centered_at(0.45).unwrap();
    let a0: Vec<f64> = build_alpha0(&mesh, &r, &[e, e]).unwrap();
    let (arg, _) = a0.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!(r.mask0()[arg]);
}

#[test]
fn beta_vertex_and_endpoint_rejection() {
    let (mesh, _) = line(49);
    let r = narrow(&mesh);
    let p = params(&mesh, &r, 2.0, 0.5);
    assert_eq!(p.beta(0.25), 0.0625);
    assert_eq!(p.beta(0.0), 0.0);
    assert_eq!(p.beta(0.5), 0.0);
    assert!(weight_fields_at(&p, &[0.0]).is_err());
    assert!(weight_fields_at(&p, &[0.5]).is_err());
    assert!(weight_fields_at(&p, &[0.25]).is_ok());
}

#[test]
fn zero_lambda_gives_uniform_phi() {
    let (mesh, _) = line(49);
    let r = narrow(&mesh);
    let p = params(&mesh, &r, 0.0, 0.5);
    let f = weight_fields_at(&p, &[0.1, 0.25, 0.4]).unwrap();
    for i in 0..3 {
        assert_eq!(f.phi_hat[i], f.phi_star[i]);
        assert_eq!(f.phi_star[i], 1.0 / f.beta[i]);
    }
}

#[test]
fn phi_star_matches_brute_force() {
    let (mesh, _) = line(49);
    let r = narrow(&mesh);
    let p = params(&mesh, &r, 1.0, 0.5);
    let f = weight_fields_at(&p, &[0.25]).unwrap();
    let brute = p
        .alpha0
        .iter()
        .map(|&a| a.exp() / 0.0625)
        .fold(1.0 / 0.0625, f64::max);
    assert_eq!(f.phi_star[0], brute);
    assert!((f.phi_star[0] - 1f64.exp() / 0.0625).abs() < 1e-12);
}

#[test]
fn weight_invariants_on_grid() {
    let (mesh, _) = line(49);
    let r = narrow(&mesh);
    let p = params(&mesh, &r, 2.0, 0.5);
    assert!(p.k > p.alpha0_sup + std::f64::consts::LN_2);
    assert!(p.alpha_bar().iter().all(|&v| v > 0.0));
    assert!(p.alpha_bar_boundary() > 0.0);
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let f = build_weight_fields(&p, &grid).unwrap();
    assert_eq!(f.times.len(), 39);
    for i in 0..f.times.len() {
        let a = f.alpha.at(i);
        let ph = f.phi.at(i);
        let amin = a.iter().copied().fold(p.alpha_bar_boundary() / f.beta[i], f64::min);
        let pmax = ph.iter().copied().fold(1.0 / f.beta[i], f64::max);
        assert_eq!(f.alpha_hat[i], amin);
        assert_eq!(f.phi_star[i], pmax);
        for k in 0..mesh.dof() {
            assert!(f.alpha_hat[i] <= a[k] && a[k] <= f.alpha_star[i]);
            assert!(f.phi_hat[i] <= ph[k] && ph[k] <= f.phi_star[i]);
        }
    }
    assert!(f.rho.windows(2).all(|w| w[0] > w[1]));
    assert_eq!(p.rho(0.0), (-4.0f64).exp());
    assert_eq!(p.rho(0.5), 0.0);
    let csv = weight_fields_csv(&mesh, &f);
    assert_eq!(csv.len(), 39 * 49);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rho_strictly_decreasing(k in 0.1f64..3.0, t1 in 0.0f64..0.49, gap in 1e-3f64..0.2) {
        let t2 = (t1 + gap).min(0.4999);
        prop_assume!(t2 > t1);
        let r1 = nullctl::weights::control_weight(k, 0.5, t1);
        let r2 = nullctl::weights::control_weight(k, 0.5, t2);
        prop_assert!(r1 > r2 || (r1 == 0.0 && r2 == 0.0));
    }

    #[test]
    fn extrema_bracket_fields(lambda in 0.0f64..4.0, t in 0.01f64..0.49) {
        let (mesh, _) = line(29);
        let r = narrow(&mesh);
        let p = params(&mesh, &r, lambda, 0.5);
        let f = weight_fields_at(&p, &[t]).unwrap();
        for k in 0..mesh.dof() {
            prop_assert!(f.alpha_hat[0] <= f.alpha.at(0)[k] && f.alpha.at(0)[k] <= f.alpha_star[0]);
            prop_assert!(f.phi_hat[0] <= f.phi.at(0)[k] && f.phi.at(0)[k] <= f.phi_star[0]);
        }
        prop_assert!(p.alpha_bar().iter().all(|&v| v > 0.0));
    }
}

fn baseline() -> (SpatialMesh<f64>, DiscreteLaplacian<f64>, CoefficientSet<f64>, ControlRegion<f64>) {
    let (mesh, lap) = line(49);
    let c = CoefficientSet::constant(0.0, 1.0, 1.0, 0.0, Hypothesis::CConst);
    let r = narrow(&mesh);
    (mesh, lap, c, r)
}

#[test]
fn zero_adjoint_gives_zero_integrals() {
    let (mesh, lap, c, r) = baseline();
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let p = params(&mesh, &r, 2.0, 0.5);
    let f = build_weight_fields(&p, &grid).unwrap();
    let adj = sys.adjoint(&vec![0.0; 49], None, None).unwrap();
    let rep = eval_carleman_functionals(&lap, &r, &p, &f, &adj).unwrap();
    assert_eq!(rep.ln_i, f64::NEG_INFINITY);
    assert_eq!(rep.ln_i_tilde, f64::NEG_INFINITY);
    assert_eq!(rep.ln_rhs_phi, f64::NEG_INFINITY);
    assert_eq!(rep.ln_rhs_psi, f64::NEG_INFINITY);
    assert!(rep.quotient(Observation::Phi).is_none());
}

#[test]
fn carleman_quotient_is_homogeneous_and_s_sensitive() {
    let (mesh, lap, c, r) = baseline();
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let p = params(&mesh, &r, 2.0, 0.5);
    let f = build_weight_fields(&p, &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi_t: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
    let adj = sys.adjoint(&phi_t, None, None).unwrap();
    let rep = eval_carleman_functionals(&lap, &r, &p, &f, &adj).unwrap();
    let q = rep.ln_quotient(Observation::Phi).unwrap();
    assert!(q.is_finite());
    assert!(rep.ln_quotient(Observation::Psi).unwrap().is_finite());

    let scaled: Vec<f64> = phi_t.iter().map(|v| -7.5 * v).collect();
    let adj2 = sys.adjoint(&scaled, None, None).unwrap();
    let rep2 = eval_carleman_functionals(&lap, &r, &p, &f, &adj2).unwrap();
    let q2 = rep2.ln_quotient(Observation::Phi).unwrap();
    assert!((q - q2).abs() <= 1e-10 * q.abs().max(1.0), "{q} vs {q2}");

    let mut p2 = p.clone();
    p2.s *= 2.0;
    let rep3 = eval_carleman_functionals(&lap, &r, &p2, &f, &adj).unwrap();
    assert_ne!(rep3.ln_i, rep.ln_i);
    assert_ne!(rep3.ln_rhs_phi, rep.ln_rhs_phi);
    for i in 0..f.times.len() {
        for &a in f.alpha.at(i) {
            assert!((-2.0 * p2.s * a).exp() <= (-2.0 * p.s * a).exp());
        }
    }
}

fn observability_setup() -> (DiscreteLaplacian<f64>, CoefficientSet<f64>, ControlRegion<f64>, TimeGrid<f64>) {
    let (_mesh, lap, c, r) = baseline();
    (lap, c, r, TimeGrid::new(0.5, 50).unwrap())
}

#[test]
fn zero_datum_is_discarded() {
    let (lap, c, r, grid) = observability_setup();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let rho = midpoint_weights(1.0, &grid);
    let (q, den) = observability_quotient(&sys, &r, &rho, &vec![0.0; 49], Observation::Phi).unwrap();
    assert!(q.is_none());
    assert_eq!(den, 0.0);
}

#[test]
fn observability_quotient_is_scale_invariant() {
    let (lap, c, r, grid) = observability_setup();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let rho = midpoint_weights(1.0, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi_t: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ten: Vec<f64> = phi_t.iter().map(|v| 10.0 * v).collect();
    for v in [Observation::Phi, Observation::Psi] {
        let q1 = observability_quotient(&sys, &r, &rho, &phi_t, v).unwrap().0.unwrap();
        let q2 = observability_quotient(&sys, &r, &rho, &ten, v).unwrap().0.unwrap();
        assert!((q1 - q2).abs() <= 1e-10 * q1, "{q1} vs {q2}");
    }
}

#[test]
fn monte_carlo_is_stable_and_deterministic() {
    let (lap, c, r, grid) = observability_setup();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let rho = midpoint_weights(1.0, &grid);
    let s64 = estimate_observability_quotient(&sys, &r, &rho, 64, 2024, Observation::Phi).unwrap();
    let s128 = estimate_observability_quotient(&sys, &r, &rho, 128, 2024, Observation::Phi).unwrap();
    assert!(s64.max.is_finite() && s64.max > 0.0);
    assert_eq!(s64.discarded, 0);
    assert!(s128.max / s64.max <= 2.0 && s128.max >= s64.max);
    assert_eq!(s64.samples[..], s128.samples[..64]);
    let again = estimate_observability_quotient(&sys, &r, &rho, 64, 2024, Observation::Phi).unwrap();
    assert_eq!(again, s64);
    assert_eq!(s64.csv().len(), 64);
    assert!(estimate_observability_quotient(&sys, &r, &rho, 0, 1, Observation::Phi).is_err());
}
