//! Convergence-study machinery: error norms (L² and weighted max-norm),
//! convergence rates against mesh size and time step, reference solutions
//! for problems without a closed form, and CSV table emission.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fractime::{build_graded_grid, build_kernels, GradedTimeGrid};
use crate::mesh2d::{rect_mesh, PointLocator, TriMesh};
use crate::mixedfem::{build_space, flux_value, pressure_value, MixedSpace};
use crate::problems::ProblemSpec;
use crate::solver::{run, step_condition, SolverConfig, StateHistory};
use crate::{Error, Result};

/// Seed for the extra max-norm sample points (fixed for reproducible
/// tables; combined with the user seed).
const SAMPLE_POINT_SALT: u64 = 0x5eed_9021;

/// Number of extra uniform sample points added to the mesh vertices for
/// the max-norm error.
pub const EXTRA_SAMPLE_POINTS: usize = 500;

/// Temporal weight applied inside the max-over-steps error norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorWeight {
    /// Unweighted.
    None,
    /// `t^{α/2}` — the weight under which the flux estimate is optimal.
    TimeHalfAlpha,
    /// `t` — the pressure weight of the pricing tables.
    Time,
    /// `t^{1+α/2}` — the flux/max-norm weight of the pricing tables.
    TimeOnePlusHalfAlpha,
}

impl ErrorWeight {
    /// The weight value at time `t`.
    pub fn value(self, t: f64, alpha: f64) -> f64 {
        match self {
            ErrorWeight::None => 1.0,
            ErrorWeight::TimeHalfAlpha => t.powf(0.5 * alpha),
            ErrorWeight::Time => t,
            ErrorWeight::TimeOnePlusHalfAlpha => t.powf(1.0 + 0.5 * alpha),
        }
    }
}

impl FromStr for ErrorWeight {
    type Err = Error;
    fn from_str(s: &str) -> Result<ErrorWeight> {
        match s {
            "none" => Ok(ErrorWeight::None),
            "half-alpha" => Ok(ErrorWeight::TimeHalfAlpha),
            "linear" => Ok(ErrorWeight::Time),
            "pricing" => Ok(ErrorWeight::TimeOnePlusHalfAlpha),
            other => Err(Error::InvalidParameter(format!(
                "unknown error weight {other:?} (expected none, half-alpha, linear or pricing)"
            ))),
        }
    }
}

impl fmt::Display for ErrorWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorWeight::None => "none",
            ErrorWeight::TimeHalfAlpha => "half-alpha",
            ErrorWeight::Time => "linear",
            ErrorWeight::TimeOnePlusHalfAlpha => "pricing",
        };
        f.write_str(s)
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub alpha: f64,
    pub gamma: f64,
    /// Number of time steps.
    pub n_steps: usize,
    /// Target mesh size of the space-time coupling.
    pub h: f64,
    /// Largest time step of the graded grid.
    pub dt: f64,
    /// Sampled admissible step bound for this problem.
    pub dt_tilde: f64,
    /// Max-over-steps (weighted) L² pressure error.
    pub e_u: f64,
    /// Max-over-steps weighted L² flux error.
    pub e_sigma: f64,
    /// Max-over-steps weighted max-norm error over the sample points.
    pub e_inf: f64,
    /// Rates against `h` and against `Δt` (undefined on the first row or
    /// when an error vanishes).
    pub r_uh: Option<f64>,
    pub r_udt: Option<f64>,
    pub r_sh: Option<f64>,
    pub r_sdt: Option<f64>,
    pub r_ih: Option<f64>,
    pub r_idt: Option<f64>,
}

/// Mesh-size target of the space-time resolution coupling
/// `h² = ½ N^{−(2−α)}`.
pub fn h_for_n(n_steps: usize, alpha: f64) -> f64 {
    (0.5 * (n_steps as f64).powf(-(2.0 - alpha))).sqrt()
}

/// Subdivisions per axis so that the longest triangle edge of the
/// structured mesh does not exceed `h`.
pub fn nx_for_h(h: f64, domain: [f64; 4]) -> usize {
    let width = (domain[1] - domain[0]).max(domain[3] - domain[2]);
    ((width * 2.0_f64.sqrt() / h).ceil() as usize).max(1)
}

/// Rate `R = ln(E₁/E₂) / ln(m₁/m₂)`; `None` when either error is not
/// positive or the resolutions coincide.
pub fn rate(e_prev: f64, e_curr: f64, m_prev: f64, m_curr: f64) -> Option<f64> {
    if e_prev <= 0.0 || e_curr <= 0.0 || m_prev <= 0.0 || m_curr <= 0.0 || m_prev == m_curr {
        return None;
    }
    Some((e_prev / e_curr).ln() / (m_prev / m_curr).ln())
}

/// Fills the rate fields of `curr` from its predecessor row.
pub fn rates(prev: &RunReport, curr: &mut RunReport) {
    curr.r_uh = rate(prev.e_u, curr.e_u, prev.h, curr.h);
    curr.r_udt = rate(prev.e_u, curr.e_u, prev.dt, curr.dt);
    curr.r_sh = rate(prev.e_sigma, curr.e_sigma, prev.h, curr.h);
    curr.r_sdt = rate(prev.e_sigma, curr.e_sigma, prev.dt, curr.dt);
    curr.r_ih = rate(prev.e_inf, curr.e_inf, prev.h, curr.h);
    curr.r_idt = rate(prev.e_inf, curr.e_inf, prev.dt, curr.dt);
}

/// Least-squares slope of `ln e` against `ln m`, sign-flipped so that a
/// method of order `p` reports `≈ p`. `None` with fewer than two usable
/// points.
pub fn aggregate_slope(ms: &[f64], es: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ms
        .iter()
        .zip(es)
        .filter(|(m, e)| **m > 0.0 && **e > 0.0)
        .map(|(m, e)| (m.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

// ---------------------------------------------------------------------------
// Error norms over a trajectory
// ---------------------------------------------------------------------------

/// `max_{1≤n≤N} w(t_n) ‖u_h^n − u(·, t_n)‖_{L²}`.
pub fn max_l2_pressure_error(
    space: &MixedSpace,
    history: &StateHistory,
    exact: &(dyn Fn([f64; 2], f64) -> f64 + Sync),
    weight: ErrorWeight,
    alpha: f64,
) -> f64 {
    let mut worst = 0.0_f64;
    for n in 1..history.pressure_states.len() {
        let t = history.times[n];
        let coeffs = &history.pressure_states[n];
        let total: f64 = (0..space.mesh.n_triangles())
            .into_par_iter()
            .map(|tri| {
                let area = space.mesh.triangle_area(tri);
                let mut s = 0.0;
                for (bary, w) in space.quad_err.points.iter().zip(&space.quad_err.weights) {
                    let x = space.physical_point(tri, *bary);
                    let d = pressure_value(space, coeffs, tri, *bary) - exact(x, t);
                    s += w * area * d * d;
                }
                s
            })
            .sum();
        worst = worst.max(weight.value(t, alpha) * total.sqrt());
    }
    worst
}

/// `max_{1≤n≤N} w(t_n) ‖σ_h^n − σ(·, t_n)‖_{L²}`.
pub fn max_l2_flux_error(
    space: &MixedSpace,
    history: &StateHistory,
    exact: &(dyn Fn([f64; 2], f64) -> [f64; 2] + Sync),
    weight: ErrorWeight,
    alpha: f64,
) -> f64 {
    assert!(
        history.flux_states.len() == history.pressure_states.len(),
        "flux history was not retained"
    );
    let mut worst = 0.0_f64;
    for n in 1..history.flux_states.len() {
        let t = history.times[n];
        let coeffs = &history.flux_states[n];
        let total: f64 = (0..space.mesh.n_triangles())
            .into_par_iter()
            .map(|tri| {
                let area = space.mesh.triangle_area(tri);
                let mut s = 0.0;
                for (bary, w) in space.quad_err.points.iter().zip(&space.quad_err.weights) {
                    let x = space.physical_point(tri, *bary);
                    let v = flux_value(space, coeffs, tri, x);
                    let e = exact(x, t);
                    s += w * area * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
                }
                s
            })
            .sum();
        worst = worst.max(weight.value(t, alpha) * total.sqrt());
    }
    worst
}

/// Mesh vertices plus `extra` uniform points in the domain interior,
/// drawn from a seeded generator so tables are reproducible.
pub fn sample_points(mesh: &TriMesh, domain: [f64; 4], extra: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = mesh.vertices.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SAMPLE_POINT_SALT);
    let [x0, x1, y0, y1] = domain;
    for _ in 0..extra {
        pts.push([rng.gen_range(x0..x1), rng.gen_range(y0..y1)]);
    }
    pts
}

/// `max_{1≤n≤N} w(t_n) max_{x ∈ points} |u_h^n(x) − u(x, t_n)|`.
pub fn max_norm_error(
    space: &MixedSpace,
    history: &StateHistory,
    exact: &(dyn Fn([f64; 2], f64) -> f64 + Sync),
    points: &[[f64; 2]],
    weight: ErrorWeight,
    alpha: f64,
) -> Result<f64> {
    let locator = PointLocator::new(&space.mesh);
    let located: Vec<(usize, [f64; 3])> = points
        .iter()
        .map(|&p| locator.locate(&space.mesh, p))
        .collect::<Result<_>>()?;
    let mut worst = 0.0_f64;
    for n in 1..history.pressure_states.len() {
        let t = history.times[n];
        let coeffs = &history.pressure_states[n];
        let step: f64 = located
            .par_iter()
            .zip(points)
            .map(|(&(tri, bary), &x)| {
                (pressure_value(space, coeffs, tri, bary) - exact(x, t)).abs()
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(weight.value(t, alpha) * step);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Reference solutions
// ---------------------------------------------------------------------------

/// A fine-resolution run used as the reference for problems without a
/// closed-form solution: solved at half the mesh size and twice the step
/// count, evaluated by piecewise-linear interpolation in time and direct
/// finite element evaluation in space.
pub struct ReferenceSolution {
    pub space: MixedSpace,
    pub history: StateHistory,
    pub grid: GradedTimeGrid,
    locator: PointLocator,
}

impl ReferenceSolution {
    /// Fine element and barycentric coordinates of a query point.
    pub fn locate(&self, x: [f64; 2]) -> Result<(usize, [f64; 3])> {
        self.locator.locate(&self.space.mesh, x)
    }

    /// Bracketing fine interval and interpolation parameter for a time
    /// `t ∈ [0, T]`: `value(t) = (1−θ) s_k + θ s_{k+1}`.
    pub fn time_interp(&self, t: f64) -> (usize, f64) {
        let times = &self.grid.times;
        let last = times.len() - 1;
        if t >= times[last] {
            return (last - 1, 1.0);
        }
        let mut k = times.partition_point(|&v| v <= t);
        k = k.clamp(1, last) - 1;
        let theta = (t - times[k]) / (times[k + 1] - times[k]);
        (k, theta)
    }

    /// Reference pressure at `(x, t)`.
    pub fn pressure(&self, x: [f64; 2], t: f64) -> Result<f64> {
        let (tri, bary) = self.locate(x)?;
        let (k, theta) = self.time_interp(t);
        let a = pressure_value(&self.space, &self.history.pressure_states[k], tri, bary);
        let b = pressure_value(&self.space, &self.history.pressure_states[k + 1], tri, bary);
        Ok((1.0 - theta) * a + theta * b)
    }

    /// Reference flux at `(x, t)`.
    pub fn flux(&self, x: [f64; 2], t: f64) -> Result<[f64; 2]> {
        let (tri, _) = self.locate(x)?;
        let (k, theta) = self.time_interp(t);
        let a = flux_value(&self.space, &self.history.flux_states[k], tri, x);
        let b = flux_value(&self.space, &self.history.flux_states[k + 1], tri, x);
        Ok([
            (1.0 - theta) * a[0] + theta * b[0],
            (1.0 - theta) * a[1] + theta * b[1],
        ])
    }
}

/// Runs the solver at `(h/2, 2N)` — `2·nx` subdivisions of the same
/// structured mesh family and a `2N`-step graded grid — and wraps the
/// result for evaluation at coarse-run points.
pub fn reference_solution(
    problem: &ProblemSpec,
    nx: usize,
    n_steps: usize,
    gamma: f64,
    alpha: f64,
    order: usize,
    config: &SolverConfig,
) -> Result<ReferenceSolution> {
    let [x0, x1, y0, y1] = problem.domain;
    let mesh = rect_mesh(x0, x1, y0, y1, 2 * nx, 2 * nx)?;
    let space = build_space(&mesh, order)?;
    let grid = build_graded_grid(2 * n_steps, gamma, problem.t_final)?;
    let kernels = build_kernels(&grid, alpha)?;
    let fine_config = SolverConfig {
        keep_flux_history: true,
        ..config.clone()
    };
    let history = run(problem, &space, &grid, &kernels, &fine_config)?;
    let locator = PointLocator::new(&space.mesh);
    Ok(ReferenceSolution {
        space,
        history,
        grid,
        locator,
    })
}

// ---------------------------------------------------------------------------
// Study driver
// ---------------------------------------------------------------------------

/// Configuration of one convergence study (one example, one α, a ladder of
/// step counts with the coupled mesh sizes).
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub alpha: f64,
    /// Grading exponent; `None` selects `(2−α)/α + 0.1`.
    pub gamma: Option<f64>,
    /// Strictly increasing ladder of step counts.
    pub n_ladder: Vec<usize>,
    /// Element order (0 or 1).
    pub order: usize,
    pub pressure_weight: ErrorWeight,
    pub flux_weight: ErrorWeight,
    pub inf_weight: ErrorWeight,
    /// Seed for the max-norm sample points.
    pub seed: u64,
    pub solver: SolverConfig,
}

impl StudyConfig {
    /// Unweighted errors with the standard grading, the usual defaults.
    pub fn new(alpha: f64, n_ladder: Vec<usize>) -> StudyConfig {
        StudyConfig {
            alpha,
            gamma: None,
            n_ladder,
            order: 0,
            pressure_weight: ErrorWeight::None,
            flux_weight: ErrorWeight::TimeHalfAlpha,
            inf_weight: ErrorWeight::TimeHalfAlpha,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }

    /// The grading exponent actually used.
    pub fn gamma_value(&self) -> f64 {
        self.gamma
            .unwrap_or((2.0 - self.alpha) / self.alpha + 0.1)
    }
}

/// Runs the ladder of a study and assembles the convergence table. Errors
/// are measured against the closed-form solution when the problem has one
/// and against an `(h/2, 2N)` reference run otherwise.
pub fn convergence_study(problem: &ProblemSpec, config: &StudyConfig) -> Result<Vec<RunReport>> {
    if config.n_ladder.is_empty() {
        return Err(Error::InvalidParameter("empty step-count ladder".into()));
    }
    if !config.n_ladder.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "step-count ladder must be strictly increasing".into(),
        ));
    }
    let alpha = config.alpha;
    let gamma = config.gamma_value();
    let mut reports: Vec<RunReport> = Vec::with_capacity(config.n_ladder.len());
    for &n_steps in &config.n_ladder {
        let h = h_for_n(n_steps, alpha);
        let nx = nx_for_h(h, problem.domain);
        let [x0, x1, y0, y1] = problem.domain;
        let mesh = rect_mesh(x0, x1, y0, y1, nx, nx)?;
        let space = build_space(&mesh, config.order)?;
        let grid = build_graded_grid(n_steps, gamma, problem.t_final)?;
        let kernels = build_kernels(&grid, alpha)?;
        let solver_config = SolverConfig {
            keep_flux_history: true,
            ..config.solver.clone()
        };
        let history = run(problem, &space, &grid, &kernels, &solver_config)?;
        let condition = step_condition(problem, &grid, alpha, 0.1, 1.1)?;
        let points = sample_points(&space.mesh, problem.domain, EXTRA_SAMPLE_POINTS, config.seed);

        let (e_u, e_sigma, e_inf) = match &problem.exact {
            Some(exact) => {
                let u = exact.u.clone();
                let s = exact.sigma.clone();
                let e_u = max_l2_pressure_error(
                    &space,
                    &history,
                    &move |x, t| u(x, t),
                    config.pressure_weight,
                    alpha,
                );
                let e_sigma = max_l2_flux_error(
                    &space,
                    &history,
                    &move |x, t| s(x, t),
                    config.flux_weight,
                    alpha,
                );
                let u2 = exact.u.clone();
                let e_inf = max_norm_error(
                    &space,
                    &history,
                    &move |x, t| u2(x, t),
                    &points,
                    config.inf_weight,
                    alpha,
                )?;
                (e_u, e_sigma, e_inf)
            }
            None => {
                let reference = reference_solution(
                    problem,
                    nx,
                    n_steps,
                    gamma,
                    alpha,
                    config.order,
                    &config.solver,
                )?;
                errors_vs_reference(&space, &history, &reference, &points, config)?
            }
        };

        let mut report = RunReport {
            alpha,
            gamma,
            n_steps,
            h,
            dt: grid.max_dt(),
            dt_tilde: condition.dt_tilde,
            e_u,
            e_sigma,
            e_inf,
            r_uh: None,
            r_udt: None,
            r_sh: None,
            r_sdt: None,
            r_ih: None,
            r_idt: None,
        };
        if let Some(prev) = reports.last() {
            rates(prev, &mut report);
        }
        reports.push(report);
    }
    Ok(reports)
}


/// Weighted error triple `(E_u, E_σ, E^∞)` of a coarse trajectory against
/// a fine reference, with element locations cached across time levels.
fn errors_vs_reference(
    space: &MixedSpace,
    history: &StateHistory,
    reference: &ReferenceSolution,
    points: &[[f64; 2]],
    config: &StudyConfig,
) -> Result<(f64, f64, f64)> {
    let alpha = config.alpha;
    // Coarse quadrature points with weights, located once in both meshes.
    struct Qp {
        tri: usize,
        bary: [f64; 3],
        x: [f64; 2],
        w: f64,
        fine_tri: usize,
        fine_bary: [f64; 3],
    }
    let mut qps = Vec::new();
    for tri in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(tri);
        for (bary, w) in space.quad_err.points.iter().zip(&space.quad_err.weights) {
            let x = space.physical_point(tri, *bary);
            let (fine_tri, fine_bary) = reference.locate(x)?;
            qps.push(Qp {
                tri,
                bary: *bary,
                x,
                w: w * area,
                fine_tri,
                fine_bary,
            });
        }
    }
    let coarse_locator = PointLocator::new(&space.mesh);
    let located: Vec<(usize, [f64; 3], usize, [f64; 3])> = points
        .iter()
        .map(|&p| {
            let (tri, bary) = coarse_locator.locate(&space.mesh, p)?;
            let (ft, fb) = reference.locate(p)?;
            Ok((tri, bary, ft, fb))
        })
        .collect::<Result<_>>()?;

    let mut e_u = 0.0_f64;
    let mut e_sigma = 0.0_f64;
    let mut e_inf = 0.0_f64;
    for n in 1..history.pressure_states.len() {
        let t = history.times[n];
        let (k, theta) = reference.time_interp(t);
        let u_coarse = &history.pressure_states[n];
        let s_coarse = &history.flux_states[n];
        let (uf_a, uf_b) = (
            &reference.history.pressure_states[k],
            &reference.history.pressure_states[k + 1],
        );
        let (sf_a, sf_b) = (
            &reference.history.flux_states[k],
            &reference.history.flux_states[k + 1],
        );
        let (sq_u, sq_s) = qps
            .par_iter()
            .map(|qp| {
                let uh = pressure_value(space, u_coarse, qp.tri, qp.bary);
                let ua = pressure_value(&reference.space, uf_a, qp.fine_tri, qp.fine_bary);
                let ub = pressure_value(&reference.space, uf_b, qp.fine_tri, qp.fine_bary);
                let du = uh - ((1.0 - theta) * ua + theta * ub);
                let sh = flux_value(space, s_coarse, qp.tri, qp.x);
                let sa = flux_value(&reference.space, sf_a, qp.fine_tri, qp.x);
                let sb = flux_value(&reference.space, sf_b, qp.fine_tri, qp.x);
                let ds = [
                    sh[0] - ((1.0 - theta) * sa[0] + theta * sb[0]),
                    sh[1] - ((1.0 - theta) * sa[1] + theta * sb[1]),
                ];
                (qp.w * du * du, qp.w * (ds[0] * ds[0] + ds[1] * ds[1]))
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        e_u = e_u.max(config.pressure_weight.value(t, alpha) * sq_u.sqrt());
        e_sigma = e_sigma.max(config.flux_weight.value(t, alpha) * sq_s.sqrt());

        let step_inf: f64 = located
            .par_iter()
            .map(|&(tri, bary, fine_tri, fine_bary)| {
                let uh = pressure_value(space, u_coarse, tri, bary);
                let ua = pressure_value(&reference.space, uf_a, fine_tri, fine_bary);
                let ub = pressure_value(&reference.space, uf_b, fine_tri, fine_bary);
                (uh - ((1.0 - theta) * ua + theta * ub)).abs()
            })
            .reduce(|| 0.0, f64::max);
        e_inf = e_inf.max(config.inf_weight.value(t, alpha) * step_inf);
    }
    Ok((e_u, e_sigma, e_inf))
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn sci(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.3e}")
    }
}

fn rate_cell(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.2}"),
        None => "--".to_string(),
    }
}

/// Parses a table produced by [`reports_to_csv`] back into reports; the
/// round trip `reports_to_csv(parse_reports_csv(csv)) == csv` holds for any
/// emitted table (`gamma` is not a CSV column and parses as NaN).
pub fn parse_reports_csv(csv: &str) -> Result<Vec<RunReport>> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| {
        Error::InvalidParameter("empty convergence table".into())
    })?;
    let expected = "alpha,N,h,dt,dt_tilde,E_u,R_uh,R_udt,E_sigma,R_sh,R_sdt,E_inf,R_ih,R_idt";
    if header != expected {
        return Err(Error::InvalidParameter(format!(
            "unexpected table header {header:?}"
        )));
    }
    let field = |s: &str| -> Result<f64> {
        if s == "inf" {
            Ok(f64::INFINITY)
        } else {
            s.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad numeric cell {s:?}")))
        }
    };
    let rate_field = |s: &str| -> Result<Option<f64>> {
        if s == "--" {
            Ok(None)
        } else {
            field(s).map(Some)
        }
    };
    let mut reports = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 14 {
            return Err(Error::ShapeMismatch(format!(
                "row has {} cells, expected 14",
                cells.len()
            )));
        }
        reports.push(RunReport {
            alpha: field(cells[0])?,
            gamma: f64::NAN,
            n_steps: cells[1]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad N cell {:?}", cells[1])))?,
            h: field(cells[2])?,
            dt: field(cells[3])?,
            dt_tilde: field(cells[4])?,
            e_u: field(cells[5])?,
            r_uh: rate_field(cells[6])?,
            r_udt: rate_field(cells[7])?,
            e_sigma: field(cells[8])?,
            r_sh: rate_field(cells[9])?,
            r_sdt: rate_field(cells[10])?,
            e_inf: field(cells[11])?,
            r_ih: rate_field(cells[12])?,
            r_idt: rate_field(cells[13])?,
        });
    }
    Ok(reports)
}

/// Renders a convergence table in the tabulated column layout.
pub fn reports_to_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(
        "alpha,N,h,dt,dt_tilde,E_u,R_uh,R_udt,E_sigma,R_sh,R_sdt,E_inf,R_ih,R_idt\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.n_steps,
            sci(r.h),
            sci(r.dt),
            sci(r.dt_tilde),
            sci(r.e_u),
            rate_cell(r.r_uh),
            rate_cell(r.r_udt),
            sci(r.e_sigma),
            rate_cell(r.r_sh),
            rate_cell(r.r_sdt),
            sci(r.e_inf),
            rate_cell(r.r_ih),
            rate_cell(r.r_idt),
        ));
    }
    out
}
