#![allow(clippy::needless_range_loop)]

use nullctl::eps_relax::{eps_sweep, solve_forward_eps, solve_hum_eps, Dynamics, EpsProblem};
use nullctl::fixed_point::{FixedPointOptions, HumSettings};
use nullctl::hum::{dual_gradient_check, CgOptions, HumProblem, Target};
use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{
    duality_residual, CoefficientSet, ControlField, CoupledSystem, Hypothesis, NodalSeries, NonlinearSpec,
    Nonlinearity, Placement, TimeGrid,
};
use nullctl::weights::midpoint_weights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(n: usize) -> (SpatialMesh<f64>, DiscreteLaplacian<f64>, ControlRegion<f64>) {
    let mesh = SpatialMesh::new(1, &[1.0], &[n]).unwrap();
    let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
    let region = ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.3, 0.4)]).unwrap();
    (mesh, lap, region)
}

fn sine(mesh: &SpatialMesh<f64>) -> Vec<f64> {
    mesh.sample(|x| (std::f64::consts::PI * x[0]).sin())
}

fn baseline() -> CoefficientSet<f64> {
    CoefficientSet::constant(0.0, 1.0, 1.0, 0.0, Hypothesis::General)
}

fn settings(grid: &TimeGrid<f64>, k: f64) -> HumSettings<f64> {
    HumSettings {
        rho: midpoint_weights(k, grid),
        penalty: 1e-6,
        cg: CgOptions { tol: 1e-10, max_iter: 500 },
    }
}

#[test]
fn zero_mass_is_the_elliptic_solver() {
    let (mesh, lap, region) = line(39);
    let grid = TimeGrid::new(0.5, 30).unwrap();
    let c = baseline();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vals = NodalSeries::from_fn(30, 39, |_, _| rng.random_range(-1.0..1.0));
    let w = ControlField::restricted(Placement::InElliptic, vals, &region);
    let y0 = sine(&mesh);
    let junk = vec![7.0; 39];
    let a = solve_forward_eps(&lap, &c, grid, 0.0, Some(&w), &y0, &junk).unwrap();
    let sys = CoupledSystem::new(&lap, &c, grid, 0.0).unwrap();
    let b = sys.forward(&y0, None, Some(&w), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decoupled_relaxed_eigenvector() {
    let (_, lap, _) = line(39);
    let grid = TimeGrid::new(0.5, 25).unwrap();
    let c = CoefficientSet::constant(0.0, 0.0, 0.0, 0.0, Hypothesis::General);
    let eps = 0.05;
    let e1 = lap.first_eigenvector().to_vec();
    let t = solve_forward_eps(&lap, &c, grid, eps, None, &vec![0.0; 39], &e1).unwrap();
    let factor = 1.0 / (1.0 + grid.dt() / eps * lap.mu1());
    for n in 0..=25 {
        let expect = factor.powi(n as i32);
        for k in 0..39 {
            assert!((t.z.at(n)[k] - expect * e1[k]).abs() <= 1e-12);
        }
        assert_eq!(t.y.at(n).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
    }
}

#[test]
fn zero_data_and_zero_control() {
    let (_, lap, region) = line(29);
    let grid = TimeGrid::new(0.5, 20).unwrap();
    let c = baseline();
    let t = solve_forward_eps(&lap, &c, grid, 1e-2, None, &vec![0.0; 29], &vec![0.0; 29]).unwrap();
    assert_eq!(t.y.max_abs() + t.z.max_abs(), 0.0);
    let p = EpsProblem {
        lap: &lap,
        region: &region,
        grid,
        dynamics: Dynamics::Linear(c),
        hum: settings(&grid, 1.0),
        y0: vec![0.0; 29],
        z0: vec![0.0; 29],
    };
    let r = solve_hum_eps(&p, 1e-2).unwrap();
    assert_eq!(r.control.values().max_abs(), 0.0);
    assert_eq!(r.iterations, 0);
}

#[test]
fn relaxed_control_drives_both_states() {
    let (mesh, lap, region) = line(49);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let y0 = sine(&mesh);
    let z0: Vec<f64> = mesh.sample(|x| (2.0 * std::f64::consts::PI * x[0]).sin());
    let p = EpsProblem {
        lap: &lap,
        region: &region,
        grid,
        dynamics: Dynamics::Linear(baseline()),
        hum: settings(&grid, 0.1),
        y0: y0.clone(),
        z0: z0.clone(),
    };
    let r = solve_hum_eps(&p, 1e-2).unwrap();
    let scale = mesh.norm(&y0) + 1e-2 * mesh.norm(&z0);
    assert!(r.converged);
    assert!(r.terminal_y_norm <= 1e-3 * scale, "{}", r.terminal_y_norm / scale);
    assert!(r.terminal_z_norm <= 1e-3 * scale, "{}", r.terminal_z_norm / scale);

    let c = baseline();
    let sys = CoupledSystem::new(&lap, &c, grid, 1e-2).unwrap();
    let hp = HumProblem {
        system: &sys,
        region: &region,
        rho: midpoint_weights(0.1, &grid),
        penalty: 1e-6,
        y0: y0.clone(),
        z0: Some(z0.clone()),
        placement: Placement::InElliptic,
        target: Target::YZ,
        cg: CgOptions::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..98).map(|_| rng.random_range(-1.0..1.0)).collect();
    for (e, curv) in dual_gradient_check(&hp, &x, 5, 3).unwrap() {
        assert!(e <= 1e-6 && curv > 0.0);
    }

    let p_t: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
    let q_t: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
    let adj = sys.adjoint(&p_t, Some(&q_t), None).unwrap();
    let res = duality_residual(&sys, &r.trajectory, &adj, &p_t, Some(&q_t), &r.control);
    assert!(res <= 1e-10, "duality residual {res}");
}

#[test]
fn sweep_converges_to_the_limit() {
    let (mesh, lap, region) = line(49);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let y0 = sine(&mesh);
    let p = EpsProblem {
        lap: &lap,
        region: &region,
        grid,
        dynamics: Dynamics::Linear(baseline()),
        hum: settings(&grid, 1.0),
        y0: y0.clone(),
        z0: y0.clone(),
    };
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4];
    let s = eps_sweep(&p, &eps).unwrap();
    assert_eq!(s.rows.len(), 6);
    assert_eq!(s.cauchy.len(), 5);
    assert!(s.bound_spread <= 10.0);
    assert!(s.limit_reduction >= 5.0);
    assert!(s.limit_monotone);
    assert!(s.rows.iter().all(|r| r.energy_holds));
    let csv = s.csv().to_csv_string();
    assert!(csv.starts_with("eps,control_norm,bound_ratio,terminal_y,terminal_z,distance_to_limit\n"));

    let one = eps_sweep(&p, &[1e-2]).unwrap();
    assert_eq!(one.rows.len(), 1);
    assert!(one.cauchy.is_empty());
    assert_eq!(one.rows[0], s.rows[2]);

    let q = EpsProblem {
        y0: vec![0.0; 49],
        ..p.clone()
    };
    let z = eps_sweep(&q, &eps).unwrap();
    assert_eq!(z.limit_control_norm, 0.0);
    let per_eps: Vec<f64> = z.rows.iter().map(|r| r.control_norm / r.eps).collect();
    let hi = per_eps.iter().copied().fold(0.0, f64::max);
    let lo = per_eps.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 3.0, "{per_eps:?}");

    assert!(eps_sweep(&p, &[1e-2, 1e-1]).is_err());
    assert!(eps_sweep(&p, &[]).is_err());
    assert!(eps_sweep(&p, &[0.0]).is_err());
}

#[test]
fn semilinear_sweep() {
    let (mesh, lap, region) = line(29);
    let grid = TimeGrid::new(0.5, 50).unwrap();
    let y0 = sine(&mesh);
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Arctan { scale: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let p = EpsProblem {
        lap: &lap,
        region: &region,
        grid,
        dynamics: Dynamics::Semilinear(spec, FixedPointOptions::default()),
        hum: settings(&grid, 1.0),
        y0: y0.clone(),
        z0: y0,
    };
    let s = eps_sweep(&p, &[1e-1, 1e-2, 1e-3]).unwrap();
    assert!(s.limit_reduction >= 5.0, "{}", s.limit_reduction);
    assert!(s.bound_spread <= 10.0);
}
