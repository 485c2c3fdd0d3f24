//! Time-stepper tests: trivial exactness, manufactured-solution accuracy,
//! determinism, equivalence of the one-step extrapolation branch, and the
//! sampled step-size condition.

use std::sync::Arc;

use fracpide::fractime::{build_graded_grid, build_kernels};
use fracpide::mesh2d::rect_mesh;
use fracpide::mixedfem::{build_space, l2_error_flux, l2_error_pressure, MixedSpace};
use fracpide::problems::{catalog, ExampleId, ProblemSpec};
use fracpide::solver::{
    run, sample_coefficient_bounds, step_condition, SolverConfig, StepPolicy,
};
use fracpide::Error;

fn paper_gamma(alpha: f64) -> f64 {
    (2.0 - alpha) / alpha + 0.1
}

fn zero_problem() -> ProblemSpec {
    ProblemSpec {
        name: "zero".into(),
        domain: [0.0, 1.0, 0.0, 1.0],
        t_final: 1.0,
        a: Arc::new(|_, _| [[1.0, 0.0], [0.0, 1.0]]),
        div_a: Some(Arc::new(|_, _| [0.0, 0.0])),
        b: Arc::new(|_, _| [0.0, 0.0]),
        c: Arc::new(|_, _| 0.0),
        lambda: 0.0,
        g: None,
        f: Arc::new(|_, _| 0.0),
        u0: Arc::new(|_| 0.0),
        dirichlet: Arc::new(|_, _| 0.0),
        exact: None,
        kappa: [1.0, 1.0],
        merton: None,
    }
}

fn run_example(
    id: ExampleId,
    alpha: f64,
    n_steps: usize,
    nx: usize,
    order: usize,
    config: &SolverConfig,
) -> (ProblemSpec, MixedSpace, fracpide::solver::StateHistory) {
    let problem = catalog(id, alpha).unwrap();
    let [x0, x1, y0, y1] = problem.domain;
    let mesh = rect_mesh(x0, x1, y0, y1, nx, nx).unwrap();
    let space = build_space(&mesh, order).unwrap();
    let grid = build_graded_grid(n_steps, paper_gamma(alpha), problem.t_final).unwrap();
    let kernels = build_kernels(&grid, alpha).unwrap();
    let history = run(&problem, &space, &grid, &kernels, config).unwrap();
    (problem, space, history)
}

#[test]
fn zero_problem_stays_identically_zero() {
    let problem = zero_problem();
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
    let space = build_space(&mesh, 0).unwrap();
    let grid = build_graded_grid(4, 2.0, 1.0).unwrap();
    let kernels = build_kernels(&grid, 0.5).unwrap();
    let history = run(&problem, &space, &grid, &kernels, &SolverConfig::default()).unwrap();

    assert_eq!(history.pressure_states.len(), 5);
    assert_eq!(history.flux_states.len(), 5);
    for state in &history.pressure_states {
        for &v in state {
            assert!(v.abs() <= 1e-13, "pressure DOF {v} not zero");
        }
    }
    for state in &history.flux_states {
        for &v in state {
            assert!(v.abs() <= 1e-13, "flux DOF {v} not zero");
        }
    }
    // No restriction: the sampled step bound is unbounded.
    assert!(history.step_condition.dt_tilde.is_infinite());
    assert!(history.step_condition.satisfied);
}

#[test]
fn manufactured_solution_accuracy_matches_reference_magnitude() {
    // Manufactured sin·sin pressure at alpha = 0.5, N = 16 and the matched
    // spatial resolution. The reference maximum L2 error is 6.680e-2.
    let alpha = 0.5;
    let n_steps = 16usize;
    let h = (0.5 * (n_steps as f64).powf(-(2.0 - alpha))).sqrt();
    let nx = (2.0 * 2.0_f64.sqrt() / h).ceil() as usize;
    let (problem, space, history) = run_example(
        ExampleId::Ex7_1,
        alpha,
        n_steps,
        nx,
        0,
        &SolverConfig::default(),
    );
    let exact = problem.exact.as_ref().unwrap();

    let mut e_u = 0.0_f64;
    let mut e_sigma = 0.0_f64;
    for n in 1..=n_steps {
        let t = history.times[n];
        let u = exact.u.clone();
        let s = exact.sigma.clone();
        e_u = e_u.max(l2_error_pressure(
            &space,
            &history.pressure_states[n],
            &move |x| u(x, t),
        ));
        e_sigma = e_sigma.max(l2_error_flux(&space, &history.flux_states[n], &move |x| {
            s(x, t)
        }));
    }
    let reference = 6.680e-2;
    assert!(
        e_u > reference / 2.0 && e_u < reference * 2.0,
        "E_u = {e_u:.4e}, expected within a factor 2 of {reference:.4e}"
    );
    // The flux error is finite and of a comparable scale.
    assert!(e_sigma > 0.0 && e_sigma < 1.0, "E_sigma = {e_sigma:.4e}");
}

#[test]
fn runs_are_bitwise_deterministic() {
    let config = SolverConfig::default();
    let (_, _, h1) = run_example(ExampleId::Ex7_3, 0.5, 4, 8, 0, &config);
    let (_, _, h2) = run_example(ExampleId::Ex7_3, 0.5, 4, 8, 0, &config);
    for n in 0..h1.pressure_states.len() {
        assert_eq!(h1.pressure_states[n], h2.pressure_states[n], "step {n}");
        assert_eq!(h1.flux_states[n], h2.flux_states[n], "step {n}");
    }
    assert_eq!(h1.pressure_norms, h2.pressure_norms);
    assert_eq!(h1.flux_norms, h2.flux_norms);
}

#[test]
fn one_step_branch_ignores_extrapolation_toggles() {
    // For alpha = 0.2 and N = 4 every step uses the one-step extrapolation
    // (the two-step window opens only after step floor(1/alpha) = 5), so
    // toggling the extrapolation options must not change a single bit.
    let base = SolverConfig::default();
    let lagged = SolverConfig {
        extrapolate_integral: false,
        ..SolverConfig::default()
    };
    let (_, _, h1) = run_example(ExampleId::Ex7_3, 0.2, 4, 8, 0, &base);
    let (_, _, h2) = run_example(ExampleId::Ex7_3, 0.2, 4, 8, 0, &lagged);
    for n in 0..h1.pressure_states.len() {
        assert_eq!(h1.pressure_states[n], h2.pressure_states[n], "step {n}");
    }
}

#[test]
fn flux_history_can_be_disabled() {
    let config = SolverConfig {
        keep_flux_history: false,
        ..SolverConfig::default()
    };
    let (_, _, history) = run_example(ExampleId::Ex7_1, 0.5, 4, 8, 0, &config);
    assert_eq!(history.flux_states.len(), 1, "only the initial flux is kept");
    assert_eq!(history.flux_norms.len(), 5, "norms are still recorded");
    assert_eq!(history.pressure_states.len(), 5);
}

#[test]
fn sampled_coefficient_bounds_are_consistent() {
    let problem = catalog(ExampleId::Ex7_2, 0.5).unwrap();
    let c = sample_coefficient_bounds(&problem, 0.5).unwrap();
    // The advertised spectral interval of A is [1, 1.15]; the sampled
    // extremes must respect it (A = I at t = 0, so gamma0 is exactly 1).
    assert!(
        c.beta0 >= 1.0 / 1.15 - 1e-9 && c.beta0 < 1.0,
        "beta0 = {}",
        c.beta0
    );
    assert!((c.gamma0 - 1.0).abs() < 5e-3, "gamma0 = {}", c.gamma0);
    // c(x,t) = 1 - x1 x2 e^{-t} >= 1 - 1 = 0, so no negative part; the
    // largest magnitude is 1 + e^0 = 2 at t = 0, |x1 x2| = 1.
    assert!(c.c_tilde_max.abs() < 1e-9, "c_tilde = {}", c.c_tilde_max);
    assert!((c.c_c - 2.0).abs() < 1e-6, "c_c = {}", c.c_c);
    assert!(c.b_tilde_max > 0.0 && c.l_b > 0.0);
    assert_eq!(c.lambda_coupling, 0.0);
}

#[test]
fn step_condition_reproduces_tabulated_bounds() {
    // Convection-diffusion example: tabulated solution-side bound at
    // alpha = 0.2 is 8.859e-1, and the largest graded step of the N = 64
    // run (4.635e-1) satisfies it.
    let alpha = 0.2;
    let problem = catalog(ExampleId::Ex7_2, alpha).unwrap();
    let grid = build_graded_grid(64, paper_gamma(alpha), problem.t_final).unwrap();
    let cond = step_condition(&problem, &grid, alpha, 0.1, 1.1).unwrap();
    let expected = 8.859e-1;
    assert!(
        (cond.dt_tilde - expected).abs() / expected < 0.05,
        "dt_tilde = {:.4e}, expected {:.4e}",
        cond.dt_tilde,
        expected
    );
    assert!(cond.satisfied, "max_dt = {:.4e}", cond.max_dt);
    assert!(cond.dt_tilde_flux > 0.0 && cond.dt_tilde_flux.is_finite());

    // Strongly time-varying diffusion: the flux-side bound collapses to
    // ~1.8e-8 and no practical grid satisfies it.
    let problem4 = catalog(ExampleId::Ex7_4, alpha).unwrap();
    let grid4 = build_graded_grid(64, paper_gamma(alpha), problem4.t_final).unwrap();
    let cond4 = step_condition(&problem4, &grid4, alpha, 0.1, 1.1).unwrap();
    let expected_flux = 1.830e-8;
    assert!(
        cond4.dt_tilde_flux / expected_flux < 2.0 && cond4.dt_tilde_flux / expected_flux > 0.5,
        "flux bound = {:.4e}, expected ~{:.4e}",
        cond4.dt_tilde_flux,
        expected_flux
    );
}

#[test]
fn enforce_policy_rejects_violated_step_condition() {
    // A strongly negative reaction coefficient makes the admissible step
    // tiny; under the enforcing policy the run must refuse to start.
    let mut problem = zero_problem();
    problem.c = Arc::new(|_, _| -50.0);
    problem.u0 = Arc::new(|x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
    let space = build_space(&mesh, 0).unwrap();
    let grid = build_graded_grid(4, 2.0, 1.0).unwrap();
    let kernels = build_kernels(&grid, 0.5).unwrap();

    let cond = step_condition(&problem, &grid, 0.5, 0.1, 1.1).unwrap();
    assert!(!cond.satisfied);

    let enforce = SolverConfig {
        step_condition_policy: StepPolicy::Enforce,
        ..SolverConfig::default()
    };
    match run(&problem, &space, &grid, &kernels, &enforce) {
        Err(Error::HypothesisViolation(_)) => {}
        other => panic!("expected a hypothesis violation, got {other:?}"),
    }
    // The default (warning) policy still runs.
    let history = run(&problem, &space, &grid, &kernels, &SolverConfig::default()).unwrap();
    assert!(!history.step_condition.satisfied);
    assert_eq!(history.pressure_states.len(), 5);
}

#[test]
fn mismatched_kernel_table_is_rejected() {
    let problem = zero_problem();
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
    let space = build_space(&mesh, 0).unwrap();
    let grid = build_graded_grid(4, 2.0, 1.0).unwrap();
    let other_grid = build_graded_grid(4, 3.0, 1.0).unwrap();
    let kernels = build_kernels(&other_grid, 0.5).unwrap();
    assert!(matches!(
        run(&problem, &space, &grid, &kernels, &SolverConfig::default()),
        Err(Error::InvalidParameter(_))
    ));
}
