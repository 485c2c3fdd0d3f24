//! Command-line front end: convergence tables, verification suites,
//! stability monitors and the problem catalog.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure,
//! 3 hypothesis violation under the enforcing step policy.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracpide::fractime::{build_graded_grid, build_kernels, caputo_power, l1_derivative};
use fracpide::gronwall::{
    check_lemma31_plain, gronwall_bound, saturate_recurrence, DfgiInstance, StabilityKind,
};
use fracpide::harness::{convergence_study, reports_to_csv, ErrorWeight, StudyConfig};
use fracpide::mesh2d::rect_mesh;
use fracpide::mixedfem::{
    build_space, flux_mass, flux_value, fortin_project, l2_project, pressure_value,
};
use fracpide::problems::{catalog, ExampleId};
use fracpide::solver::{run, stability_report, step_condition, SolverConfig, StepPolicy};
use fracpide::Error as LibError;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_HYPOTHESIS: u8 = 3;

/// Hard ceiling on the step-count ladder unless explicitly overridden.
const DESK_SCALE_N: usize = 512;

#[derive(Parser)]
#[command(
    name = "fracpide",
    about = "IMEX-L1 mixed FEM solver for time-fractional PIDEs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write one CSV table per alpha.
    Convergence {
        /// Flat key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inline key=value overrides (applied after the file).
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run property suites for the discrete building blocks.
    Verify {
        /// Suite: kernels, gronwall, fem or all.
        suite: String,
        /// Seed for the randomized properties.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the stability certificates on a solver run.
    Stability {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the catalog of benchmark problems.
    ListProblems,
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct RunConfig {
    example: ExampleId,
    alphas: Vec<f64>,
    n_ladder: Vec<usize>,
    /// `None` means the standard grading `(2-alpha)/alpha + 0.1`.
    gamma: Option<f64>,
    element_order: usize,
    epsilon: f64,
    delta: f64,
    pressure_weight: ErrorWeight,
    flux_weight: ErrorWeight,
    inf_weight: ErrorWeight,
    step_policy: StepPolicy,
    output_dir: PathBuf,
    seed: u64,
    allow_large_n: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            example: ExampleId::Ex7_1,
            alphas: vec![0.5],
            n_ladder: vec![4, 8, 16, 32, 64],
            gamma: None,
            element_order: 0,
            epsilon: 0.1,
            delta: 1.1,
            pressure_weight: ErrorWeight::None,
            flux_weight: ErrorWeight::TimeHalfAlpha,
            inf_weight: ErrorWeight::TimeHalfAlpha,
            step_policy: StepPolicy::Warn,
            output_dir: PathBuf::from("."),
            seed: 0,
        allow_large_n: false,
        }
    }
}

const CONFIG_KEYS: &str = "example, alphas, n_ladder, gamma, element_order, epsilon, delta, \
pressure_weight, flux_weight, inf_weight, step_policy, output_dir, seed, allow_large_n";

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

impl RunConfig {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |what: &str| format!("invalid {what} {value:?} for key {key}");
        match key {
            "example" => {
                self.example = value.parse().map_err(|_| bad("example id"))?;
            }
            "alphas" => {
                self.alphas = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("alpha list"))?;
            }
            "n_ladder" => {
                self.n_ladder = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("step-count list"))?;
            }
            "gamma" => {
                self.gamma = if value == "paper" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("grading exponent"))?)
                };
            }
            "element_order" => {
                let order: usize = value.parse().map_err(|_| bad("element order"))?;
                if order > 1 {
                    return Err("element_order must be 0 or 1".into());
                }
                self.element_order = order;
            }
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad("number"))?,
            "delta" => self.delta = value.parse().map_err(|_| bad("number"))?,
            "pressure_weight" => {
                self.pressure_weight = value.parse().map_err(|e: LibError| e.to_string())?;
            }
            "flux_weight" => {
                self.flux_weight = value.parse().map_err(|e: LibError| e.to_string())?;
            }
            "inf_weight" => {
                self.inf_weight = value.parse().map_err(|e: LibError| e.to_string())?;
            }
            "step_policy" => {
                self.step_policy = match value {
                    "enforce" => StepPolicy::Enforce,
                    "warn" => StepPolicy::Warn,
                    _ => return Err(bad("step policy (enforce or warn)")),
                };
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "allow_large_n" => self.allow_large_n = parse_bool(value)?,
            _ => {
                return Err(format!(
                    "unknown config key {key:?}; valid keys: {CONFIG_KEYS}"
                ))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        if self.alphas.is_empty() {
            return Err("alphas must not be empty".into());
        }
        if self.alphas.iter().any(|&a| !(0.0 < a && a < 1.0)) {
            return Err("every alpha must lie in (0, 1)".into());
        }
        if self.n_ladder.is_empty() {
            return Err("n_ladder must not be empty".into());
        }
        if !self.n_ladder.windows(2).all(|w| w[0] < w[1]) {
            return Err("n_ladder must be strictly increasing".into());
        }
        if !self.allow_large_n {
            if let Some(&n) = self.n_ladder.iter().find(|&&n| n > DESK_SCALE_N) {
                return Err(format!(
                    "N = {n} exceeds the desk-scale limit {DESK_SCALE_N}; \
                     set allow_large_n=true to override"
                ));
            }
        }
        if self.epsilon <= 0.0 || self.delta <= 1.0 {
            return Err("need epsilon > 0 and delta > 1".into());
        }
        Ok(())
    }
}

fn load_config(file: Option<&PathBuf>, overrides: &[String]) -> Result<RunConfig, String> {
    let mut config = RunConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            config.apply(key.trim(), value.trim())?;
        }
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("override {item:?}: expected key=value"))?;
        config.apply(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn exit_for(err: &LibError) -> u8 {
    match err {
        LibError::HypothesisViolation(_) => EXIT_HYPOTHESIS,
        _ => EXIT_NUMERICAL,
    }
}

fn study_config(config: &RunConfig, alpha: f64) -> StudyConfig {
    StudyConfig {
        alpha,
        gamma: config.gamma,
        n_ladder: config.n_ladder.clone(),
        order: config.element_order,
        pressure_weight: config.pressure_weight,
        flux_weight: config.flux_weight,
        inf_weight: config.inf_weight,
        seed: config.seed,
        solver: SolverConfig {
            step_condition_policy: config.step_policy,
            ..SolverConfig::default()
        },
    }
}

fn cmd_convergence(config: &RunConfig) -> Result<(), (u8, String)> {
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| (EXIT_USAGE, format!("cannot create output directory: {e}")))?;
    for &alpha in &config.alphas {
        let problem = catalog(config.example, alpha)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let study = study_config(config, alpha);
        let reports = convergence_study(&problem, &study)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let csv = reports_to_csv(&reports);
        let path = config
            .output_dir
            .join(format!("convergence_{}_alpha{}.csv", config.example, alpha));
        std::fs::write(&path, &csv)
            .map_err(|e| (EXIT_NUMERICAL, format!("cannot write {}: {e}", path.display())))?;
        println!("# {} alpha={alpha} -> {}", config.example, path.display());
        print!("{csv}");
    }
    Ok(())
}

fn cmd_stability(config: &RunConfig) -> Result<(), (u8, String)> {
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| (EXIT_USAGE, format!("cannot create output directory: {e}")))?;
    let n_steps = *config.n_ladder.last().unwrap();
    for &alpha in &config.alphas {
        let problem = catalog(config.example, alpha)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let gamma = config
            .gamma
            .unwrap_or((2.0 - alpha) / alpha + 0.1);
        let h = fracpide::harness::h_for_n(n_steps, alpha);
        let nx = fracpide::harness::nx_for_h(h, problem.domain);
        let [x0, x1, y0, y1] = problem.domain;
        let mesh = rect_mesh(x0, x1, y0, y1, nx, nx)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let space = build_space(&mesh, config.element_order)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let grid = build_graded_grid(n_steps, gamma, problem.t_final)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        let kernels =
            build_kernels(&grid, alpha).map_err(|e| (exit_for(&e), e.to_string()))?;

        let condition = step_condition(&problem, &grid, alpha, config.epsilon, config.delta)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        println!(
            "# {} alpha={alpha}: dt_tilde={:.4e} (flux-side {:.4e}), max dt={:.4e}, {}",
            config.example,
            condition.dt_tilde,
            condition.dt_tilde_flux,
            condition.max_dt,
            if condition.satisfied {
                "step condition satisfied"
            } else {
                "STEP CONDITION NOT SATISFIED"
            }
        );

        let solver_config = SolverConfig {
            step_condition_policy: config.step_policy,
            ..SolverConfig::default()
        };
        let history = run(&problem, &space, &grid, &kernels, &solver_config)
            .map_err(|e| (exit_for(&e), e.to_string()))?;
        for kind in [StabilityKind::Solution, StabilityKind::Flux] {
            let report = stability_report(
                &problem,
                &space,
                &kernels,
                &history,
                kind,
                config.epsilon,
                config.delta,
            )
            .map_err(|e| (exit_for(&e), e.to_string()))?;
            let tag = match kind {
                StabilityKind::Solution => "solution",
                StabilityKind::Flux => "flux",
            };
            let path = config.output_dir.join(format!(
                "stability_{}_{}_alpha{}.csv",
                config.example, tag, alpha
            ));
            std::fs::write(&path, report.to_csv()).map_err(|e| {
                (EXIT_NUMERICAL, format!("cannot write {}: {e}", path.display()))
            })?;
            println!(
                "# {tag} bound: {} ({} steps) -> {}",
                if report.all_pass { "all pass" } else { "VIOLATED" },
                report.rows.len(),
                path.display()
            );
        }
    }
    Ok(())
}

fn cmd_list_problems() {
    for id in ExampleId::ALL {
        println!("{id}: {}", id.description());
    }
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

struct SuiteOutcome {
    failures: usize,
}

fn report_check(name: &str, worst: f64, tol: f64, outcome: &mut SuiteOutcome) {
    let pass = worst <= tol;
    println!(
        "  [{}] {name}: worst {worst:.3e} (tolerance {tol:.1e})",
        if pass { "PASS" } else { "FAIL" }
    );
    if !pass {
        outcome.failures += 1;
    }
}

fn verify_kernels(seed: u64, outcome: &mut SuiteOutcome) -> Result<(), LibError> {
    println!("kernel identities:");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_identity = 0.0_f64;
    let mut worst_monotone = 0.0_f64;
    for _ in 0..100 {
        let n: usize = rng.gen_range(2..=200);
        let gamma_exp: f64 = rng.gen_range(1.0..=10.0);
        let alpha: f64 = rng.gen_range(0.05..=0.99);
        let grid = build_graded_grid(n, gamma_exp, 1.0)?;
        let kernels = build_kernels(&grid, alpha)?;
        for nn in 1..=n {
            for i in 1..=nn {
                let s: f64 = (i..=nn).map(|j| kernels.p(nn, j) * kernels.k(j, i)).sum();
                worst_identity = worst_identity.max((s - 1.0).abs());
            }
            for j in 2..=nn {
                let diff = kernels.k(nn, j) - kernels.k(nn, j - 1);
                worst_monotone = worst_monotone.max(-diff.min(0.0));
            }
        }
    }
    report_check("sum P.K = 1 (100 seeded tables)", worst_identity, 1e-12, outcome);
    report_check("kernel monotonicity", worst_monotone, 1e-12, outcome);

    let mut worst_ratio = 0.0_f64;
    for &alpha in &[0.2, 0.5, 0.8, 0.99] {
        let grid = build_graded_grid(64, 1.0, 1.0)?;
        let kernels = build_kernels(&grid, alpha)?;
        let expected = 1.0 / (2.0 - 2.0_f64.powf(1.0 - alpha));
        let ratio = kernels.p(64, 64) / kernels.p(64, 63);
        worst_ratio = worst_ratio.max((ratio - expected).abs());
    }
    report_check("uniform-mesh diagonal ratio", worst_ratio, 1e-12, outcome);

    // L1 derivative exactness on phi(t) = t.
    let mut worst_linear = 0.0_f64;
    for _ in 0..20 {
        let n: usize = rng.gen_range(2..=64);
        let gamma_exp: f64 = rng.gen_range(1.0..=6.0);
        let alpha: f64 = rng.gen_range(0.1..=0.95);
        let grid = build_graded_grid(n, gamma_exp, 1.0)?;
        let kernels = build_kernels(&grid, alpha)?;
        let history: Vec<f64> = (0..=n).map(|j| grid.t(j)).collect();
        for nn in 1..=n {
            let exact = caputo_power(1.0, alpha, grid.t(nn))?;
            let got = l1_derivative(&history, &kernels, nn)?;
            worst_linear = worst_linear.max((got - exact).abs() / exact.abs());
        }
    }
    report_check("L1 exactness on t", worst_linear, 1e-12, outcome);
    Ok(())
}

fn verify_gronwall(seed: u64, outcome: &mut SuiteOutcome) -> Result<(), LibError> {
    println!("fractional Gronwall machinery:");
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst_slack = f64::MIN;
    for _ in 0..200 {
        let n: usize = rng.gen_range(2..=32);
        let alpha: f64 = rng.gen_range(0.1..=0.9);
        let gamma_exp: f64 = rng.gen_range(1.0..=4.0);
        let grid = build_graded_grid(n, gamma_exp, 1.0)?;
        let kernels = build_kernels(&grid, alpha)?;
        let capital_lambda: f64 = rng.gen_range(0.0..=2.0);
        let threshold =
            fracpide::gronwall::step_threshold(alpha, 1.1, capital_lambda);
        if grid.max_dt() > threshold {
            continue;
        }
        let lambda: Vec<Vec<f64>> = (1..=n)
            .map(|step| {
                let mut row: Vec<f64> =
                    (0..=step).map(|_| rng.gen_range(0.0..1.0)).collect();
                let sum: f64 = row.iter().sum();
                let scale = capital_lambda * rng.gen_range(0.0..1.0) / sum.max(1e-300);
                row.iter_mut().for_each(|w| *w *= scale);
                row
            })
            .collect();
        let inst = DfgiInstance {
            kernels,
            v0: rng.gen_range(0.0..2.0),
            lambda,
            xi: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
            eta: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            zeta: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            capital_lambda,
            delta: 1.1,
        };
        let v = saturate_recurrence(&inst)?;
        let bound = gronwall_bound(&inst)?;
        for (vn, bn) in v.iter().skip(1).zip(&bound) {
            if bn.is_finite() {
                worst_slack = worst_slack.max((vn - bn) / bn.abs().max(1.0));
            }
        }
    }
    report_check(
        "saturated recurrences below the bound",
        worst_slack.max(0.0),
        1e-12,
        outcome,
    );

    let mut worst_margin = 0.0_f64;
    for _ in 0..200 {
        let n: usize = rng.gen_range(2..=16);
        let dim: usize = rng.gen_range(1..=20);
        let alpha: f64 = rng.gen_range(0.1..=0.9);
        let grid = build_graded_grid(n, rng.gen_range(1.0..=4.0), 1.0)?;
        let kernels = build_kernels(&grid, alpha)?;
        let phis: Vec<Vec<f64>> = (0..=n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let scale: f64 = phis
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let margins = check_lemma31_plain(&kernels, &phis)?;
        for m in margins {
            worst_margin = worst_margin.max(-m / scale.max(1e-300));
        }
    }
    report_check(
        "fractional-derivative inequality margins",
        worst_margin,
        1e-12,
        outcome,
    );
    Ok(())
}

fn verify_fem(seed: u64, outcome: &mut SuiteOutcome) -> Result<(), LibError> {
    println!("mixed finite element structure:");
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mesh = rect_mesh(-1.0, 1.0, -1.0, 1.0, 8, 8)?;

    // Commuting diagram on seeded polynomial fields.
    let mut worst_commuting = 0.0_f64;
    for order in [0usize, 1] {
        let space = build_space(&mesh, order)?;
        for _ in 0..25 {
            let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c2 = c.clone();
            let field = move |x: [f64; 2]| -> [f64; 2] {
                [
                    c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1],
                    c[5] + c[6] * x[0] + c[7] * x[1] + c[8] * x[1] * x[1] + c[9] * x[0] * x[1],
                ]
            };
            let div = move |x: [f64; 2]| -> f64 {
                c2[1] + 2.0 * c2[3] * x[0] + c2[4] * x[1] + c2[7] + 2.0 * c2[8] * x[1]
                    + c2[9] * x[0]
            };
            let proj_flux = fortin_project(&space, &field)?;
            let proj_div = l2_project(&space, &div)?;
            // Compare divergence of the projected flux with the projected
            // divergence at the pressure quadrature points.
            for tri in 0..space.mesh.n_triangles() {
                for bary in &space.quad.points {
                    let b = [bary[0], bary[1], bary[2]];
                    let x = space.physical_point(tri, b);
                    let mut div_h = 0.0;
                    let divs = space.flux_basis_divs(tri, x);
                    for (k, dof) in space.flux_dofs(tri).iter().enumerate() {
                        div_h += proj_flux[*dof] * divs[k];
                    }
                    let p_h = pressure_value(&space, &proj_div, tri, b);
                    worst_commuting = worst_commuting.max((div_h - p_h).abs());
                }
            }
        }
    }
    report_check("commuting diagram (50 fields)", worst_commuting, 1e-11, outcome);

    // Rayleigh quotients of the weighted flux mass matrix against the
    // plain one stay within the spectral bounds of A^{-1}.
    let problem = catalog(ExampleId::Ex7_2, 0.5)?;
    let space = build_space(&mesh, 0)?;
    let sys = fracpide::mixedfem::assemble(&space, &problem, 0.4, 1.0)?;
    let plain = flux_mass(&space);
    let (beta0, gamma0) = (1.0 / 1.15, 1.0);
    let mut worst_rayleigh = 0.0_f64;
    for _ in 0..50 {
        let x: Vec<f64> = (0..space.flux_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let num: f64 = sys
            .m_b
            .matvec(&x)
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum();
        let den: f64 = plain.matvec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
        let q = num / den;
        worst_rayleigh = worst_rayleigh
            .max((beta0 - q).max(0.0))
            .max((q - gamma0).max(0.0));
    }
    report_check("weighted mass Rayleigh quotients", worst_rayleigh, 1e-12, outcome);

    // Patch test: order-0 elements reproduce a linear stationary solution.
    let patch = patch_test_error()?;
    report_check("stationary patch test", patch, 1e-10, outcome);
    Ok(())
}

/// Solves the stationary mixed system for `u = 2 + 3x - y` with identity
/// diffusion and unit reaction; returns the worst DOF/flux deviation.
fn patch_test_error() -> Result<f64, LibError> {
    use fracpide::linalg::{SparseLu, Triplets};

    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4)?;
    let space = build_space(&mesh, 0)?;
    let u = |x: [f64; 2]| 2.0 + 3.0 * x[0] - x[1];
    let problem = fracpide::problems::ProblemSpec {
        name: "patch".into(),
        domain: [0.0, 1.0, 0.0, 1.0],
        t_final: 1.0,
        a: std::sync::Arc::new(|_, _| [[1.0, 0.0], [0.0, 1.0]]),
        div_a: Some(std::sync::Arc::new(|_, _| [0.0, 0.0])),
        b: std::sync::Arc::new(|_, _| [0.0, 0.0]),
        c: std::sync::Arc::new(|_, _| 1.0),
        lambda: 0.0,
        g: None,
        f: std::sync::Arc::new(move |x, _| u(x)),
        u0: std::sync::Arc::new(u),
        dirichlet: std::sync::Arc::new(move |x, _| u(x)),
        exact: None,
        kappa: [1.0, 1.0],
        merton: None,
    };
    let sys = fracpide::mixedfem::assemble(&space, &problem, 0.0, 0.0)?;
    let (nf, np) = (space.flux_dim, space.pressure_dim);
    let mut s = Triplets::new(nf + np, nf + np);
    s.push_block(0, 0, &sys.m_b, 1.0);
    s.push_block_transposed(0, nf, &sys.d, 1.0);
    s.push_block(nf, 0, &sys.d, -1.0);
    s.push_block(nf, 0, &sys.c_b, 1.0);
    s.push_block(nf, nf, &sys.m_c, 1.0);
    let mut rhs = sys.rhs_flux.clone();
    rhs.extend_from_slice(&sys.rhs_pressure);
    let f = fracpide::mixedfem::pressure_load(&space, &u);
    for i in 0..np {
        rhs[nf + i] += f[i];
    }
    let sol = SparseLu::factorize(&s)?.solve(&rhs)?;
    let proj = l2_project(&space, &u)?;
    let mut worst = 0.0_f64;
    for (a, b) in sol[nf..].iter().zip(&proj) {
        worst = worst.max((a - b).abs());
    }
    // Exact flux is the constant gradient (3, -1).
    for tri in 0..space.mesh.n_triangles() {
        let x = space.physical_point(tri, [1.0 / 3.0; 3]);
        let v = flux_value(&space, &sol[..nf], tri, x);
        worst = worst.max((v[0] - 3.0).abs()).max((v[1] + 1.0).abs());
    }
    Ok(worst)
}

fn cmd_verify(suite: &str, seed: u64) -> Result<(), (u8, String)> {
    let mut outcome = SuiteOutcome { failures: 0 };
    let runner = |name: &str,
                  outcome: &mut SuiteOutcome|
     -> Result<(), (u8, String)> {
        let res = match name {
            "kernels" => verify_kernels(seed, outcome),
            "gronwall" => verify_gronwall(seed, outcome),
            "fem" => verify_fem(seed, outcome),
            _ => unreachable!(),
        };
        res.map_err(|e| (exit_for(&e), e.to_string()))
    };
    match suite {
        "kernels" | "gronwall" | "fem" => runner(suite, &mut outcome)?,
        "all" => {
            for name in ["kernels", "gronwall", "fem"] {
                runner(name, &mut outcome)?;
            }
        }
        other => {
            return Err((
                EXIT_USAGE,
                format!("unknown suite {other:?} (expected kernels, gronwall, fem or all)"),
            ))
        }
    }
    if outcome.failures > 0 {
        let mut msg = String::new();
        let _ = write!(msg, "{} property check(s) failed", outcome.failures);
        return Err((EXIT_NUMERICAL, msg));
    }
    println!("all checks passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Convergence { config, overrides } => load_config(config.as_ref(), overrides)
            .map_err(|e| (EXIT_USAGE, e))
            .and_then(|c| cmd_convergence(&c)),
        Command::Stability { config, overrides } => load_config(config.as_ref(), overrides)
            .map_err(|e| (EXIT_USAGE, e))
            .and_then(|c| cmd_stability(&c)),
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
        Command::ListProblems => {
            cmd_list_problems();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
