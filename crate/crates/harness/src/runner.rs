//! One function per subcommand. Each builds the problem from the config,
//! runs it and routes every artifact through the run writer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nullctl::eps_relax::{eps_sweep, Dynamics, EpsProblem};
use nullctl::fixed_point::{run_fixed_point, FixedPointOptions, HumSettings};
use nullctl::galerkin::{solve_galerkin, wellposedness_suite, SuiteInput};
use nullctl::hum::{cg_log_csv, dual_gradient_check, penalty_sweep, solve_hum, verify_optimality_system, HumProblem};
use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{
    duality_residual, energy_audit, gaussian_vector, l2q_distance, l2q_norm, solve_forward_semilinear,
    trajectory_csv, write_trajectory_binary, ControlField, CoupledSystem, NodalSeries, Placement, TimeGrid,
    Trajectory,
};
use nullctl::report::{Cell, CsvTable};
use nullctl::weights::{
    build_weight_fields, estimate_observability_quotient, eval_carleman_functionals, midpoint_weights,
    weight_fields_csv, Observation,
};

use crate::config::{ExperimentConfig, ObservationName};
use crate::output::{RunManifest, RunWriter};
use crate::{acceptance, RunError};

pub const SUBCOMMANDS: [&str; 10] = [
    "solve-forward",
    "solve-adjoint",
    "hum",
    "penalty-sweep",
    "semilinear",
    "eps-sweep",
    "observability",
    "carleman-probe",
    "galerkin-check",
    "all-acceptance",
];

/// Mesh, operator, region and time grid shared by every subcommand.
pub struct Setup {
    pub mesh: SpatialMesh<f64>,
    pub lap: DiscreteLaplacian<f64>,
    pub region: ControlRegion<f64>,
    pub grid: TimeGrid<f64>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, with_basis: bool) -> nullctl::Result<Self> {
        let mesh = cfg.mesh()?;
        let lap = if with_basis {
            DiscreteLaplacian::assemble_with_basis(&mesh)?
        } else {
            cfg.laplacian(&mesh)?
        };
        let region = cfg.region(&mesh)?;
        let grid = cfg.grid()?;
        Ok(Self { mesh, lap, region, grid })
    }
}

/// Uniform random values in `[-amplitude, amplitude]` restricted to `ω`.
pub fn random_control(
    setup: &Setup,
    placement: Placement,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> ControlField<f64> {
    let vals = NodalSeries::from_fn(setup.grid.steps(), setup.lap.dof(), |_, _| {
        amplitude * rng.random_range(-1.0..1.0)
    });
    ControlField::restricted(placement, vals, &setup.region)
}

fn norms_csv(setup: &Setup, traj: &Trajectory<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["n", "t", "y_norm", "z_norm"]);
    let (y, z) = (traj.y_norms(&setup.mesh), traj.z_norms(&setup.mesh));
    for n in 0..setup.grid.node_count() {
        t.push(vec![n.into(), setup.grid.node(n).into(), y[n].into(), z[n].into()]);
    }
    t
}

fn write_trajectory(w: &mut RunWriter, setup: &Setup, traj: &Trajectory<f64>, stem: &str) -> nullctl::Result<()> {
    w.csv(&format!("{stem}.csv"), &trajectory_csv(&setup.mesh, traj))?;
    let mut bin = Vec::new();
    write_trajectory_binary(&setup.mesh, traj, &mut bin)?;
    w.bytes(&format!("{stem}.bin"), &bin)?;
    w.csv(&format!("{stem}_norms.csv"), &norms_csv(setup, traj))
}

pub fn run(subcommand: &str, cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let mut w = RunWriter::create(subcommand, cfg)?;
    match subcommand {
        "solve-forward" => solve_forward(cfg, &mut w)?,
        "solve-adjoint" => solve_adjoint(cfg, &mut w)?,
        "hum" => hum(cfg, &mut w)?,
        "penalty-sweep" => sweep(cfg, &mut w)?,
        "semilinear" => semilinear(cfg, &mut w)?,
        "eps-sweep" => relaxation(cfg, &mut w)?,
        "observability" => observability(cfg, &mut w)?,
        "carleman-probe" => carleman(cfg, &mut w)?,
        "galerkin-check" => galerkin(cfg, &mut w)?,
        "all-acceptance" => all_acceptance(cfg, &mut w)?,
        other => return Err(RunError::Usage(format!("unknown subcommand '{other}'"))),
    }
    let failed = w.summaries().iter().any(|(k, v)| k == "passed" && *v == 0.0);
    let manifest = w.finish()?;
    if failed {
        return Err(RunError::Solver(format!(
            "{subcommand} finished but its checks failed; see {}",
            cfg.output.join("summary.csv").display()
        )));
    }
    Ok(manifest)
}

fn solve_forward(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let eps = cfg.hum.eps;
    let y0 = cfg.y0(&s.mesh);
    let z0 = cfg.z0(&s.mesh);
    let z0 = (eps > 0.0).then_some(z0.as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.forward.control_amplitude;
    let ctrl = (amp != 0.0).then(|| random_control(&s, cfg.hum.placement.build(), amp, &mut rng));
    w.stage("solve");
    let (traj, mu) = if cfg.forward.nonlinear {
        let spec = cfg.nonlinear_spec();
        spec.validate(&s.lap)?;
        let (t, stats) = solve_forward_semilinear(&s.lap, &spec, &s.grid, eps, ctrl.as_ref(), &y0, z0, &cfg.newton())?;
        w.summary("newton_max_iterations", stats.max_iterations() as f64);
        (t, spec.d)
    } else {
        let c = cfg.coefficients(&s.mesh, &s.grid);
        let sys = CoupledSystem::new(&s.lap, &c, s.grid, eps)?;
        (sys.forward(&y0, z0, ctrl.as_ref(), None)?, c.mu)
    };
    w.stage("write");
    write_trajectory(w, &s, &traj, "trajectory")?;
    let controls: Vec<&ControlField<f64>> = ctrl.iter().collect();
    let audit = energy_audit(&s.lap, &traj, &controls, mu, eps);
    w.summary("terminal_y_norm", s.mesh.norm(traj.terminal_y()));
    w.summary("terminal_z_norm", s.mesh.norm(traj.terminal_z()));
    w.summary("energy_c_delta", audit.c_delta);
    w.summary("energy_c_z", audit.c_z);
    w.summary("energy_holds", audit.holds() as u8 as f64);
    Ok(())
}

fn solve_adjoint(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let eps = cfg.hum.eps;
    let c = cfg.coefficients(&s.mesh, &s.grid);
    let sys = CoupledSystem::new(&s.lap, &c, s.grid, eps)?;
    let p = cfg.forward.terminal.sample(&s.mesh, 1.0);
    let q = (eps > 0.0).then(|| p.clone());
    w.stage("solve");
    let adj = sys.adjoint(&p, q.as_deref(), None)?;
    w.stage("duality");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let y0 = cfg.y0(&s.mesh);
    let z0 = cfg.z0(&s.mesh);
    let ctrl = random_control(&s, cfg.hum.placement.build(), 1.0, &mut rng);
    let fwd = sys.forward(&y0, (eps > 0.0).then_some(z0.as_slice()), Some(&ctrl), None)?;
    let residual = duality_residual(&sys, &fwd, &adj, &p, q.as_deref(), &ctrl);
    w.stage("write");
    // Columns y and z hold the adjoint pair (phi, psi).
    write_trajectory(w, &s, &adj, "adjoint")?;
    w.summary("phi0_norm", s.mesh.norm(adj.y.at(0)));
    w.summary("psi0_norm", s.mesh.norm(adj.z.at(0)));
    w.summary("duality_residual", residual);
    Ok(())
}

fn hum_problem<'a>(
    cfg: &ExperimentConfig,
    s: &'a Setup,
    sys: &'a CoupledSystem<'a, f64>,
) -> HumProblem<'a, f64> {
    HumProblem {
        system: sys,
        region: &s.region,
        rho: midpoint_weights(cfg.weights.big_k, &s.grid),
        penalty: cfg.hum.penalty,
        y0: cfg.y0(&s.mesh),
        z0: (cfg.hum.eps > 0.0).then(|| cfg.z0(&s.mesh)),
        placement: cfg.hum.placement.build(),
        target: cfg.target(),
        cg: cfg.cg(),
    }
}

fn hum(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let c = cfg.coefficients(&s.mesh, &s.grid);
    let sys = CoupledSystem::new(&s.lap, &c, s.grid, cfg.hum.eps)?;
    let problem = hum_problem(cfg, &s, &sys);
    w.stage("cg");
    let r = solve_hum(&problem)?;
    w.stage("checks");
    let opt = verify_optimality_system(&problem, &r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x: Vec<f64> = gaussian_vector(s.lap.dof() * if cfg.hum.eps > 0.0 { 2 } else { 1 }, &mut rng);
    let grad = dual_gradient_check(&problem, &x, cfg.hum.gradient_directions, cfg.seed)?;
    let grad_err = grad.iter().map(|g| g.0).fold(0.0, f64::max);
    w.stage("write");
    w.csv("cg_log.csv", &cg_log_csv(&r.log))?;
    let mut ctab = CsvTable::new(&["j", "t_mid", "rho", "control_norm"]);
    for (j, n) in r.control.step_norms(&s.mesh).iter().enumerate() {
        ctab.push(vec![j.into(), s.grid.midpoint(j).into(), problem.rho[j].into(), (*n).into()]);
    }
    w.csv("control_norms.csv", &ctab)?;
    write_trajectory(w, &s, &r.trajectory, "controlled")?;
    let y0n = s.mesh.norm(&problem.y0);
    w.summary("terminal_y_norm", r.terminal_y_norm);
    w.summary("terminal_z_norm", r.terminal_z_norm);
    w.summary("relative_terminal", if y0n > 0.0 { r.terminal_y_norm / y0n } else { 0.0 });
    w.summary("control_norm", r.control_norm);
    w.summary("weighted_norm_sq", r.weighted_norm_sq);
    w.summary("functional", r.functional);
    w.summary("cg_iterations", r.iterations as f64);
    w.summary("cg_relative_residual", r.relative_residual);
    w.summary("cg_converged", r.converged as u8 as f64);
    w.summary("optimality_terminal_residual", opt.terminal_residual);
    w.summary("optimality_cost", opt.cost);
    w.summary("optimality_pairing", opt.pairing);
    w.summary("gradient_check_max_error", grad_err);
    if !r.converged {
        return Err(RunError::Solver(format!(
            "CG stopped after {} iterations with relative residual {:e}",
            r.iterations, r.relative_residual
        )));
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let c = cfg.coefficients(&s.mesh, &s.grid);
    let sys = CoupledSystem::new(&s.lap, &c, s.grid, cfg.hum.eps)?;
    let problem = hum_problem(cfg, &s, &sys);
    w.stage("sweep");
    let rep = penalty_sweep(&problem, &cfg.hum.penalty_list)?;
    w.stage("write");
    w.csv("sweep.csv", &rep.csv())?;
    w.summary("monotone", rep.monotone as u8 as f64);
    w.summary("terminal_reduction", rep.terminal_reduction);
    w.summary("weighted_spread", rep.weighted_spread);
    Ok(())
}

fn fixed_point_options(cfg: &ExperimentConfig) -> FixedPointOptions<f64> {
    FixedPointOptions {
        theta: cfg.fixed_point.theta,
        tol: cfg.fixed_point.tol,
        max_iter: cfg.fixed_point.max_iter,
        fallback_theta: cfg.fixed_point.fallback_theta,
        newton: cfg.newton(),
    }
}

fn hum_settings(cfg: &ExperimentConfig, grid: &TimeGrid<f64>) -> HumSettings<f64> {
    HumSettings {
        rho: midpoint_weights(cfg.weights.big_k, grid),
        penalty: cfg.hum.penalty,
        cg: cfg.cg(),
    }
}

fn semilinear(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let spec = cfg.nonlinear_spec();
    let y0 = cfg.y0(&s.mesh);
    w.stage("fixed-point");
    let st = run_fixed_point(
        &s.lap,
        &s.region,
        &s.grid,
        &spec,
        &y0,
        cfg.hum.placement.build(),
        &hum_settings(cfg, &s.grid),
        &fixed_point_options(cfg),
    )?;
    w.stage("write");
    w.csv("fixed_point.csv", &st.csv())?;
    w.summary("converged", st.converged as u8 as f64);
    w.summary("iterations", st.iteration as f64);
    w.summary("difference", st.difference);
    w.summary("theta", st.theta);
    w.summary("used_fallback", st.used_fallback as u8 as f64);
    w.summary("linear_terminal_norm", st.hum.terminal_y_norm);
    w.summary("max_coefficient", st.max_coefficient);
    w.summary("control_ratio", st.control_ratio);
    if let Some(r) = &st.replay {
        w.summary("replay_terminal_norm", r.terminal_norm);
        w.summary("replay_consistency", r.consistency);
        write_trajectory(w, &s, &r.trajectory, "replay")?;
    }
    if !st.converged {
        return Err(RunError::Solver(format!(
            "fixed point did not converge in {} iterations (difference {:e})",
            st.iteration, st.difference
        )));
    }
    Ok(())
}

fn relaxation(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let dynamics = if cfg.relaxation.semilinear {
        Dynamics::Semilinear(cfg.nonlinear_spec(), fixed_point_options(cfg))
    } else {
        Dynamics::Linear(cfg.coefficients(&s.mesh, &s.grid))
    };
    let problem = EpsProblem {
        lap: &s.lap,
        region: &s.region,
        grid: s.grid,
        dynamics,
        hum: hum_settings(cfg, &s.grid),
        y0: cfg.y0(&s.mesh),
        z0: cfg.z0(&s.mesh),
    };
    w.stage("sweep");
    let r = eps_sweep(&problem, &cfg.relaxation.eps_list)?;
    w.stage("write");
    w.csv("eps_sweep.csv", &r.csv())?;
    let mut cauchy = CsvTable::new(&["eps_from", "eps_to", "distance"]);
    for (i, d) in r.cauchy.iter().enumerate() {
        cauchy.push(vec![r.rows[i].eps.into(), r.rows[i + 1].eps.into(), (*d).into()]);
    }
    w.csv("eps_cauchy.csv", &cauchy)?;
    w.summary("limit_control_norm", r.limit_control_norm);
    w.summary("bound_spread", r.bound_spread);
    w.summary("limit_reduction", r.limit_reduction);
    w.summary("limit_monotone", r.limit_monotone as u8 as f64);
    w.summary("cauchy_monotone", r.cauchy_monotone as u8 as f64);
    Ok(())
}

fn observation(cfg: &ExperimentConfig) -> Observation {
    match cfg.observability.variant {
        ObservationName::Phi => Observation::Phi,
        ObservationName::Psi => Observation::Psi,
    }
}

fn observability(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let c = cfg.coefficients(&s.mesh, &s.grid);
    let sys = CoupledSystem::new(&s.lap, &c, s.grid, cfg.hum.eps)?;
    let rho = midpoint_weights(cfg.weights.big_k, &s.grid);
    let n = cfg.observability.samples;
    w.stage("monte-carlo");
    let stats = estimate_observability_quotient(&sys, &s.region, &rho, n, cfg.seed, observation(cfg))?;
    let doubled = estimate_observability_quotient(&sys, &s.region, &rho, 2 * n, cfg.seed, observation(cfg))?;
    w.stage("write");
    w.csv("quotients.csv", &stats.csv())?;
    w.summary("samples", n as f64);
    w.summary("max", stats.max);
    w.summary("mean", stats.mean);
    w.summary("min", stats.min);
    w.summary("discarded", stats.discarded as f64);
    w.summary("max_doubled", doubled.max);
    w.summary("doubling_ratio", doubled.max / stats.max);
    Ok(())
}

fn carleman(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, false)?;
    let c = cfg.coefficients(&s.mesh, &s.grid);
    let sys = CoupledSystem::new(&s.lap, &c, s.grid, 0.0)?;
    let params = cfg.weight_params(&s.mesh, &s.region)?;
    let fields = build_weight_fields(&params, &s.grid)?;
    w.stage("functionals");
    let mut tab = CsvTable::new(&[
        "seed",
        "ln_i",
        "ln_i_tilde",
        "ln_rhs_phi",
        "ln_rhs_psi",
        "ln_quotient_phi",
        "ln_quotient_psi",
    ]);
    for i in 0..cfg.observability.samples {
        let seed = cfg.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = gaussian_vector(s.lap.dof(), &mut rng);
        let adj = sys.adjoint(&p, None, None)?;
        let r = eval_carleman_functionals(&s.lap, &s.region, &params, &fields, &adj)?;
        let nan = f64::NAN;
        tab.push(vec![
            Cell::from(seed),
            r.ln_i.into(),
            r.ln_i_tilde.into(),
            r.ln_rhs_phi.into(),
            r.ln_rhs_psi.into(),
            r.ln_quotient(Observation::Phi).unwrap_or(nan).into(),
            r.ln_quotient(Observation::Psi).unwrap_or(nan).into(),
        ]);
    }
    w.stage("write");
    w.csv("weight_fields.csv", &weight_fields_csv(&s.mesh, &fields))?;
    w.csv("carleman.csv", &tab)?;
    w.summary("k", params.k);
    w.summary("s", params.s);
    w.summary("alpha0_sup", params.alpha0_sup);
    Ok(())
}

fn galerkin(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    w.stage("setup");
    let s = Setup::new(cfg, true)?;
    let spec = cfg.nonlinear_spec();
    spec.validate(&s.lap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.galerkin.control_amplitude;
    let control = (amp != 0.0).then(|| random_control(&s, cfg.hum.placement.build(), amp, &mut rng));
    let input = SuiteInput {
        lap: &s.lap,
        reaction: &spec,
        grid: s.grid,
        y0: cfg.y0(&s.mesh),
        control,
        mu: spec.d,
        newton: cfg.newton(),
    };
    w.stage("suite");
    let rep = wellposedness_suite(&input, &cfg.galerkin.modes)?;
    w.stage("full-order");
    let dof = s.lap.dof();
    let full = solve_galerkin(&s.lap, &spec, &s.grid, 0.0, input.control.as_ref(), &input.y0, None, dof, &input.newton)?;
    let (fd, _) =
        solve_forward_semilinear(&s.lap, &spec, &s.grid, 0.0, input.control.as_ref(), &input.y0, None, &input.newton)?;
    let scale = l2q_norm(&fd.y, &s.mesh, &s.grid);
    let gap = l2q_distance(&full.trajectory.y, &fd.y, &s.mesh, &s.grid);
    w.stage("write");
    let mut tab = CsvTable::new(&["modes_from", "modes_to", "distance"]);
    for (i, d) in rep.distances.iter().enumerate() {
        tab.push(vec![rep.modes[i].into(), rep.modes[i + 1].into(), (*d).into()]);
    }
    w.csv("n_convergence.csv", &tab)?;
    w.csv("coefficients.csv", &full.coefficient_csv())?;
    w.summary("distances_decreasing", rep.distances_decreasing as u8 as f64);
    w.summary("energy_c_delta", rep.energy.c_delta);
    w.summary("energy_c_z", rep.energy.c_z);
    w.summary("dual_constant", rep.dual_constant);
    w.summary("uniqueness_gap", rep.uniqueness_gap);
    w.summary("spectral_decay", rep.spectral_decay as u8 as f64);
    w.summary("full_order_relative_gap", if scale > 0.0 { gap / scale } else { gap });
    w.summary("passed", (rep.passes() && gap <= 1e-8 * scale.max(1e-300)) as u8 as f64);
    Ok(())
}

fn all_acceptance(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<(), RunError> {
    let mut tab = CsvTable::new(&["criterion", "passed", "detail"]);
    let mut all = true;
    for id in acceptance::CRITERIA {
        w.stage(&format!("criterion-{id}"));
        let o = acceptance::evaluate(id, cfg);
        println!("{}", o.line());
        all &= o.passed;
        tab.push(vec![id.into(), o.passed.into(), o.detail.clone().into()]);
    }
    w.stage("write");
    w.csv("acceptance.csv", &tab)?;
    w.summary("passed", all as u8 as f64);
    Ok(())
}
