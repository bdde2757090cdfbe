use nullctl::galerkin::{solve_galerkin, wellposedness_suite, SuiteInput};
use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{
    solve_forward_semilinear, CoefficientSet, ControlField, CoupledSystem, Hypothesis, NewtonOptions, NodalSeries,
    NonlinearSpec, Nonlinearity, Placement, TimeGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(n: usize) -> (SpatialMesh<f64>, DiscreteLaplacian<f64>, ControlRegion<f64>) {
    let mesh = SpatialMesh::new(1, &[1.0], &[n]).unwrap();
    let lap = DiscreteLaplacian::assemble_with_basis(&mesh).unwrap();
    let region = ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.3, 0.4)]).unwrap();
    (mesh, lap, region)
}

fn bump(mesh: &SpatialMesh<f64>) -> Vec<f64> {
    mesh.sample(|x| x[0] * (1.0 - x[0]) * (1.0 + x[0]))
}

fn random_control(region: &ControlRegion<f64>, steps: usize, dof: usize, place: Placement, seed: u64) -> ControlField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = NodalSeries::from_fn(steps, dof, |_, _| rng.random_range(-1.0..1.0));
    ControlField::restricted(place, vals, region)
}

#[test]
fn basis_is_mass_orthonormal() {
    let (mesh, lap, _) = line(31);
    let b = lap.basis().unwrap();
    assert_eq!(b.values.len(), 31);
    assert!(b.values.windows(2).all(|w| w[0] < w[1]));
    for i in 0..31 {
        for j in 0..31 {
            let g = mesh.inner(&b.vectors[i], &b.vectors[j]);
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g - e).abs() <= 1e-10, "({i},{j}) {g}");
        }
    }
    assert!((b.values[0] - lap.mu1()).abs() <= 1e-10 * lap.mu1());
}

#[test]
fn full_order_matches_finite_differences_linear() {
    let (mesh, lap, region) = line(29);
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let c = CoefficientSet::constant(0.3, 1.0, 1.0, -0.5, Hypothesis::General);
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Linear { slope: 0.3 },
        small_f: Nonlinearity::Linear { slope: 1.0 },
        b: 1.0,
        d: -0.5,
    };
    let y0 = bump(&mesh);
    for place in [Placement::InParabolic, Placement::InElliptic] {
        let ctrl = random_control(&region, 40, 29, place, 11);
        let fd = CoupledSystem::new(&lap, &c, grid, 0.0)
            .unwrap()
            .forward(&y0, None, Some(&ctrl), None)
            .unwrap();
        let g = solve_galerkin(&lap, &spec, &grid, 0.0, Some(&ctrl), &y0, None, 29, &NewtonOptions::default()).unwrap();
        let dy = g.trajectory.y.sub(&fd.y).max_abs();
        let dz = g.trajectory.z.sub(&fd.z).max_abs();
        assert!(dy <= 1e-8 && dz <= 1e-8, "{place:?}: {dy} {dz}");
    }
}

#[test]
fn full_order_matches_finite_differences_sine() {
    let (mesh, lap, region) = line(25);
    let grid = TimeGrid::new(0.5, 30).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Sin { scale: 1.0 },
        small_f: Nonlinearity::Arctan { scale: 2.0 },
        b: 1.0,
        d: 0.5,
    };
    let y0: Vec<f64> = bump(&mesh).iter().map(|v| 8.0 * v).collect();
    let ctrl = random_control(&region, 30, 25, Placement::InParabolic, 5);
    let opts = NewtonOptions::default();
    let (fd, _) = solve_forward_semilinear(&lap, &spec, &grid, 0.0, Some(&ctrl), &y0, None, &opts).unwrap();
    let g = solve_galerkin(&lap, &spec, &grid, 0.0, Some(&ctrl), &y0, None, 25, &opts).unwrap();
    assert!(g.trajectory.y.sub(&fd.y).max_abs() <= 1e-8);
    assert!(g.trajectory.z.sub(&fd.z).max_abs() <= 1e-8);

    let relaxed_z0: Vec<f64> = mesh.sample(|x| (std::f64::consts::PI * x[0]).sin());
    let (fd, _) = solve_forward_semilinear(&lap, &spec, &grid, 0.05, None, &y0, Some(&relaxed_z0), &opts).unwrap();
    let g = solve_galerkin(&lap, &spec, &grid, 0.05, None, &y0, Some(&relaxed_z0), 25, &opts).unwrap();
    assert!(g.trajectory.y.sub(&fd.y).max_abs() <= 1e-8);
    assert!(g.trajectory.z.sub(&fd.z).max_abs() <= 1e-8);
}

#[test]
fn single_mode_follows_scalar_recursion() {
    let (_, lap, _) = line(39);
    let grid = TimeGrid::new(1.0, 20).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Zero,
        b: 0.0,
        d: 0.0,
    };
    let e1 = lap.basis().unwrap().vectors[0].clone();
    let y0: Vec<f64> = e1.iter().map(|v| 2.0 * v).collect();
    let g = solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0, None, 1, &NewtonOptions::default()).unwrap();
    let factor = 1.0 / (1.0 + grid.dt() * lap.mu1());
    for n in 0..=20 {
        let expect = 2.0 * factor.powi(n as i32);
        assert!((g.y_hat.at(n)[0] - expect).abs() <= 1e-12 * expect.max(1.0));
        assert_eq!(g.z_hat.at(n)[0], 0.0);
    }
}

#[test]
fn zero_data_give_zero() {
    let (_, lap, _) = line(19);
    let grid = TimeGrid::new(0.5, 10).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Sin { scale: 1.0 },
        small_f: Nonlinearity::Tanh { scale: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let g = solve_galerkin(&lap, &spec, &grid, 0.0, None, &[0.0; 19], None, 8, &NewtonOptions::default()).unwrap();
    assert_eq!(g.trajectory.y.max_abs() + g.trajectory.z.max_abs(), 0.0);
    assert!(g.newton_iterations.iter().all(|&i| i == 0));
}

#[test]
fn rejects_bad_inputs() {
    let (_, lap, _) = line(19);
    let grid = TimeGrid::new(0.5, 10).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Zero,
        b: 0.0,
        d: 0.0,
    };
    let o = NewtonOptions::default();
    let y0 = vec![0.1; 19];
    assert!(solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0, None, 0, &o).is_err());
    assert!(solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0, None, 20, &o).is_err());
    assert!(solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0[..5], None, 4, &o).is_err());
    assert!(solve_galerkin(&lap, &spec, &grid, 0.1, None, &y0, None, 4, &o).is_err());
    let plain = DiscreteLaplacian::assemble(lap.mesh()).unwrap();
    assert!(solve_galerkin(&plain, &spec, &grid, 0.0, None, &y0, None, 4, &o).is_err());
}

#[test]
fn unforced_energy_decays_at_every_order() {
    let (mesh, lap, _) = line(31);
    let grid = TimeGrid::new(0.5, 25).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Arctan { scale: 1.0 },
        small_f: Nonlinearity::Sin { scale: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let y0 = bump(&mesh);
    for n in [2, 5, 13, 31] {
        let g = solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0, None, n, &NewtonOptions::default()).unwrap();
        let norms = g.trajectory.y_norms(&mesh);
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "order {n}");
    }
}

#[test]
fn wellposedness_suite_passes() {
    let (mesh, lap, region) = line(63);
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Sin { scale: 1.0 },
        small_f: Nonlinearity::Arctan { scale: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let input = SuiteInput {
        lap: &lap,
        reaction: &spec,
        grid,
        y0: bump(&mesh),
        control: Some(random_control(&region, 40, 63, Placement::InParabolic, 2)),
        mu: 0.0,
        newton: NewtonOptions::default(),
    };
    let r = wellposedness_suite(&input, &[4, 8, 16, 32]).unwrap();
    assert_eq!(r.distances.len(), 3);
    assert!(r.distances_decreasing, "{:?}", r.distances);
    assert!(r.energy.holds());
    assert!(r.dual_constant.is_finite() && r.dual_constant > 0.0);
    assert!(r.uniqueness_gap <= 1e-8, "{}", r.uniqueness_gap);
    assert!(r.spectral_decay);
    assert!(r.passes());

    let zero = SuiteInput {
        y0: vec![0.0; 63],
        control: None,
        ..input.clone()
    };
    let z = wellposedness_suite(&zero, &[4, 8]).unwrap();
    assert!(z.passes());
    assert_eq!(z.distances, vec![0.0]);
    assert!(wellposedness_suite(&input, &[8, 4]).is_err());
    assert!(wellposedness_suite(&input, &[]).is_err());
}

#[test]
fn coefficient_csv_layout() {
    let (mesh, lap, _) = line(19);
    let grid = TimeGrid::new(0.5, 3).unwrap();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Zero,
        b: 0.0,
        d: 0.0,
    };
    let g = solve_galerkin(&lap, &spec, &grid, 0.0, None, &bump(&mesh), None, 2, &NewtonOptions::default()).unwrap();
    let csv = g.coefficient_csv().to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,j,y_hat,z_hat");
    assert_eq!(lines.len(), 1 + 4 * 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_error_shrinks_with_order(seed in 0u64..1000) {
        let (mesh, lap, _) = line(21);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y0: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = TimeGrid::new(0.1, 2).unwrap();
        let spec = NonlinearSpec { big_f: Nonlinearity::Zero, small_f: Nonlinearity::Zero, b: 0.0, d: 0.0 };
        let mut last = f64::INFINITY;
        for n in 1..=21 {
            let g = solve_galerkin(&lap, &spec, &grid, 0.0, None, &y0, None, n, &NewtonOptions::default()).unwrap();
            let diff: Vec<f64> = g.trajectory.y.at(0).iter().zip(&y0).map(|(a, b)| a - b).collect();
            let err = mesh.norm(&diff);
            prop_assert!(err <= last * (1.0 + 1e-12) + 1e-14);
            last = err;
        }
        prop_assert!(last <= 1e-10);
    }
}
