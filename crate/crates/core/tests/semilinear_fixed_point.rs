use nullctl::fixed_point::{quotient_coefficient, run_fixed_point, FixedPointOptions, HumSettings};
use nullctl::hum::CgOptions;
use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{Coefficient, NodalSeries, NonlinearSpec, Nonlinearity, Placement, TimeGrid};
use nullctl::weights::midpoint_weights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    mesh: SpatialMesh<f64>,
    lap: DiscreteLaplacian<f64>,
    region: ControlRegion<f64>,
    grid: TimeGrid<f64>,
    hum: HumSettings<f64>,
}

fn case() -> Case {
    let mesh = SpatialMesh::new(1, &[1.0], &[49]).unwrap();
    let lap = DiscreteLaplacian::assemble(&mesh).unwrap();
    let region = ControlRegion::new(&mesh, &[(0.2, 0.5)], &[(0.3, 0.4)]).unwrap();
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let hum = HumSettings {
        rho: midpoint_weights(1.0, &grid),
        penalty: 1e-6,
        cg: CgOptions { tol: 1e-10, max_iter: 500 },
    };
    Case {
        mesh,
        lap,
        region,
        grid,
        hum,
    }
}

fn sine(mesh: &SpatialMesh<f64>, amp: f64) -> Vec<f64> {
    mesh.sample(|x| amp * (std::f64::consts::PI * x[0]).sin())
}

fn sin_spec() -> NonlinearSpec<f64> {
    NonlinearSpec {
        big_f: Nonlinearity::Sin { scale: 1.0 },
        small_f: Nonlinearity::Linear { slope: 1.0 },
        b: 1.0,
        d: 0.0,
    }
}

fn field(values: &[f64]) -> NodalSeries<f64> {
    NodalSeries::from_slices(&[values.to_vec()])
}

fn space_time(c: Coefficient<f64>) -> NodalSeries<f64> {
    match c {
        Coefficient::SpaceTime(s) => s,
        other => panic!("expected a space-time coefficient, got {other:?}"),
    }
}

#[test]
fn quotient_examples() {
    let sin = Nonlinearity::Sin { scale: 1.0 };
    let c = space_time(quotient_coefficient(&sin, &field(&[0.0, std::f64::consts::FRAC_PI_2])));
    assert_eq!(c.at(0)[0], 1.0);
    assert!((c.at(0)[1] - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    let lin = Nonlinearity::Linear { slope: -0.7 };
    assert_eq!(quotient_coefficient(&lin, &field(&[3.0])), Coefficient::Constant(-0.7));
    let zero = space_time(quotient_coefficient(&sin, &field(&[0.0, 0.0])));
    assert_eq!(zero.at(0), &[1.0, 1.0]);
}

#[test]
fn quotient_is_bounded_by_lipschitz_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let vals: Vec<f64> = (0..10_000)
        .map(|i| {
            let mag = 10f64.powf(rng.random_range(-14.0..3.0));
            if i % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let k = field(&vals);
    for g in [
        Nonlinearity::Sin { scale: 1.5 },
        Nonlinearity::Arctan { scale: 2.0 },
        Nonlinearity::Tanh { scale: 0.5 },
    ] {
        let l = g.lipschitz();
        let c = space_time(quotient_coefficient(&g, &k));
        assert!(c.at(0).iter().all(|v| v.abs() <= l * (1.0 + 1e-15)), "{g:?}");
    }
}

#[test]
fn linear_problem_converges_in_one_iteration() {
    let c = case();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Linear { slope: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let y0 = sine(&c.mesh, 1.0);
    let opts = FixedPointOptions::default();
    let s = run_fixed_point(&c.lap, &c.region, &c.grid, &spec, &y0, Placement::InParabolic, &c.hum, &opts).unwrap();
    assert!(s.converged && s.stationary);
    assert_eq!(s.iteration, 1);
    let replay = s.replay.unwrap();
    assert!(replay.consistency <= 1e-10 * s.hum.trajectory.y.max_abs());
}

#[test]
fn zero_datum_stays_at_zero() {
    let c = case();
    let s = run_fixed_point(
        &c.lap,
        &c.region,
        &c.grid,
        &sin_spec(),
        &vec![0.0; 49],
        Placement::InParabolic,
        &c.hum,
        &FixedPointOptions::default(),
    )
    .unwrap();
    assert!(s.converged);
    assert_eq!(s.iteration, 1);
    assert_eq!(s.difference, 0.0);
    assert_eq!(s.k.max_abs(), 0.0);
    assert_eq!(s.hum.control.values().max_abs(), 0.0);
}

#[test]
fn sine_nonlinearity_reaches_a_fixed_point() {
    let c = case();
    let y0 = sine(&c.mesh, 1.0);
    let opts = FixedPointOptions::default();
    let spec = sin_spec();
    let s = run_fixed_point(&c.lap, &c.region, &c.grid, &spec, &y0, Placement::InParabolic, &c.hum, &opts).unwrap();
    assert!(s.converged && !s.used_fallback);
    assert!(s.iteration <= 30);
    assert!(s.difference <= 1e-6);
    assert!(s.max_coefficient <= 1.0);
    assert!(s.control_ratio.is_finite() && s.control_ratio > 0.0);
    let replay = s.replay.as_ref().unwrap();
    assert!(replay.terminal_norm <= 2.0 * s.hum.terminal_y_norm);
    assert!(replay.consistency <= 1e-6);
    assert!(s.history.windows(2).all(|w| w[1].difference < w[0].difference));

    let again = run_fixed_point(&c.lap, &c.region, &c.grid, &spec, &y0, Placement::InParabolic, &c.hum, &opts).unwrap();
    assert_eq!(again.history, s.history);
    let csv = s.csv().to_csv_string();
    assert!(csv.starts_with("n,difference,control_norm,terminal_norm,cg_iters\n"));
    assert_eq!(csv.lines().count(), s.history.len() + 1);
}

#[test]
fn arctan_in_elliptic_row() {
    let c = case();
    let spec = NonlinearSpec {
        big_f: Nonlinearity::Zero,
        small_f: Nonlinearity::Arctan { scale: 1.0 },
        b: 1.0,
        d: 0.0,
    };
    let y0 = sine(&c.mesh, 2.0);
    let s = run_fixed_point(
        &c.lap,
        &c.region,
        &c.grid,
        &spec,
        &y0,
        Placement::InElliptic,
        &c.hum,
        &FixedPointOptions::default(),
    )
    .unwrap();
    assert!(s.converged && s.difference <= 1e-6);
    let replay = s.replay.unwrap();
    assert!(replay.terminal_norm <= 2.0 * s.hum.terminal_y_norm);
}

#[test]
fn cap_without_convergence_is_flagged() {
    let c = case();
    let y0 = sine(&c.mesh, 1.0);
    let opts = FixedPointOptions {
        max_iter: 1,
        fallback_theta: None,
        ..FixedPointOptions::default()
    };
    let s = run_fixed_point(&c.lap, &c.region, &c.grid, &sin_spec(), &y0, Placement::InParabolic, &c.hum, &opts).unwrap();
    assert!(!s.converged);
    assert!(s.replay.is_none());
    let with_fallback = FixedPointOptions {
        max_iter: 1,
        ..FixedPointOptions::default()
    };
    let f = run_fixed_point(&c.lap, &c.region, &c.grid, &sin_spec(), &y0, Placement::InParabolic, &c.hum, &with_fallback)
        .unwrap();
    assert!(f.used_fallback && !f.converged);
    assert_eq!(f.theta, 0.5);
}

#[test]
fn invalid_setups_are_rejected() {
    let c = case();
    let y0 = sine(&c.mesh, 1.0);
    let nonlinear_f = NonlinearSpec {
        small_f: Nonlinearity::Arctan { scale: 1.0 },
        ..sin_spec()
    };
    let opts = FixedPointOptions::default();
    assert!(run_fixed_point(&c.lap, &c.region, &c.grid, &nonlinear_f, &y0, Placement::InParabolic, &c.hum, &opts).is_err());
    let bad_theta = FixedPointOptions {
        theta: 1.5,
        ..opts
    };
    assert!(run_fixed_point(&c.lap, &c.region, &c.grid, &sin_spec(), &y0, Placement::InParabolic, &c.hum, &bad_theta).is_err());
}
