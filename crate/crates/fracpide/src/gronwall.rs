//! Discrete fractional Grönwall machinery and stability certificates.
//!
//! This module turns the a-priori estimates used by the time stepper into
//! executable checks:
//!
//! * [`check_lemma31_plain`] / [`check_lemma31_weighted`] verify the discrete
//!   fractional-derivative inequalities `½ Dᵅ‖φⁿ‖² ≤ (Dᵅφⁿ, φⁿ)` and their
//!   time-dependent weighted variant on concrete vector histories.
//! * [`saturate_recurrence`] constructs the *maximal* sequence satisfying a
//!   discrete fractional Grönwall hypothesis with equality, so that the bound
//!   produced by [`gronwall_bound`] can be stress-tested from below.
//! * [`stability_bound_solution`] / [`stability_bound_flux`] evaluate the
//!   closed-form stability envelopes for the scalar unknown and the flux and
//!   compare them against computed solution norms, producing a
//!   [`StabilityReport`] with per-step pass/fail rows.
//!
//! All Mittag-Leffler evaluations go through the log-domain routine from
//! [`crate::fractime`], so bounds that overflow `f64` still yield meaningful
//! comparisons.

use crate::fractime::{gamma, mittag_leffler_ln, KernelTable};
use crate::{Error, Result};

/// One instance of the discrete fractional Grönwall hypothesis
///
/// ```text
/// Dᵅ (vⁿ)² ≤ Σ_{i=0}^{n} λⁿ_{n-i} (vⁱ)² + vⁿ ξⁿ + (ηⁿ)² + (ζⁿ)²,   1 ≤ n ≤ N,
/// ```
///
/// together with the constants entering the resulting bound.
#[derive(Debug, Clone)]
pub struct DfgiInstance {
    /// Discrete kernels (and the time grid they were built on).
    pub kernels: KernelTable,
    /// Initial value `v⁰ ≥ 0`.
    pub v0: f64,
    /// `lambda[n-1][j] = λⁿ_j ≥ 0` for `0 ≤ j ≤ n`; the weight `λⁿ_{n-i}`
    /// multiplies `(vⁱ)²`.
    pub lambda: Vec<Vec<f64>>,
    /// `xi[n-1] = ξⁿ ≥ 0`.
    pub xi: Vec<f64>,
    /// `eta[n-1] = ηⁿ`.
    pub eta: Vec<f64>,
    /// `zeta[n-1] = ζⁿ`.
    pub zeta: Vec<f64>,
    /// Uniform bound `Λ ≥ Σ_j λⁿ_j` on the weight row sums.
    pub capital_lambda: f64,
    /// Margin parameter `δ > 1` in the maximum-step condition.
    pub delta: f64,
}

impl DfgiInstance {
    /// Number of time steps `N`.
    pub fn n_steps(&self) -> usize {
        self.kernels.n_steps()
    }

    /// Largest zero-lag weight `max_n λⁿ_0`.
    pub fn max_lambda0(&self) -> f64 {
        self.lambda
            .iter()
            .map(|row| row[0])
            .fold(0.0_f64, f64::max)
    }

    /// Maximum admissible time step `(δ Γ(2-α) max_n λⁿ_0)^{-1/α}`
    /// (`+∞` when all zero-lag weights vanish).
    pub fn max_step_threshold(&self) -> f64 {
        step_threshold(self.kernels.alpha, self.delta, self.max_lambda0())
    }

    /// Validates shapes, sign constraints, the row-sum bound, and the
    /// maximum-step condition.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_steps();
        if self.delta <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "delta must exceed 1, got {}",
                self.delta
            )));
        }
        if self.v0 < 0.0 {
            return Err(Error::InvalidParameter("v0 must be non-negative".into()));
        }
        if self.capital_lambda <= 0.0 {
            return Err(Error::InvalidParameter(
                "capital_lambda must be positive".into(),
            ));
        }
        for (name, v) in [("xi", &self.xi), ("eta", &self.eta), ("zeta", &self.zeta)] {
            if v.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
        }
        if self.xi.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter("xi entries must be >= 0".into()));
        }
        if self.lambda.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "lambda has {} rows, expected {n}",
                self.lambda.len()
            )));
        }
        for (idx, row) in self.lambda.iter().enumerate() {
            let step = idx + 1;
            if row.len() != step + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "lambda row for step {step} has length {}, expected {}",
                    row.len(),
                    step + 1
                )));
            }
            if row.iter().any(|&w| w < 0.0) {
                return Err(Error::InvalidParameter(
                    "lambda weights must be >= 0".into(),
                ));
            }
            let sum: f64 = row.iter().sum();
            if sum > self.capital_lambda * (1.0 + 1e-12) {
                return Err(Error::HypothesisViolation(format!(
                    "weight row sum {sum} at step {step} exceeds capital_lambda {}",
                    self.capital_lambda
                )));
            }
        }
        let dt_max = self.kernels.grid.max_dt();
        let threshold = self.max_step_threshold();
        if dt_max > threshold * (1.0 + 1e-12) {
            return Err(Error::HypothesisViolation(format!(
                "maximum step {dt_max} exceeds admissible threshold {threshold}"
            )));
        }
        Ok(())
    }
}

/// Maximum admissible step `(δ Γ(2-α) rate)^{-1/α}`; `+∞` when `rate = 0`.
pub fn step_threshold(alpha: f64, delta: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        (delta * gamma(2.0 - alpha) * rate).powf(-1.0 / alpha)
    }
}

/// Step-dependent envelope `Λ_n` of the weight row-sum bound: `Λ` while
/// `n ≤ n_α`, and `Λ (1 + max_{n_α+1 ≤ j ≤ n} Pʲʲ/Pʲ˒ʲ⁻¹)` afterwards.
pub fn lambda_envelope(kernels: &KernelTable, capital_lambda: f64, n: usize) -> f64 {
    match kernels.max_p_diag_ratio(n) {
        Some(ratio) => capital_lambda * (1.0 + ratio),
        None => capital_lambda,
    }
}

/// Evaluates the discrete fractional Grönwall bound
///
/// ```text
/// vⁿ ≤ C_δ E_α(C_δ Λ_n t_nᵅ) Φ_n,
/// Φ_n = v⁰ + max_j Σᵢ Pʲ⁽ⁱ⁾ ξⁱ + (2 t_nᵅ)^{1/2} max_j ηʲ + max_j (Σᵢ Pʲ⁽ⁱ⁾ (ζⁱ)²)^{1/2},
/// ```
///
/// returning the values for `n = 1..=N`. Entries can be `+∞` if the
/// Mittag-Leffler factor overflows `f64`.
pub fn gronwall_bound(inst: &DfgiInstance) -> Result<Vec<f64>> {
    inst.validate()?;
    let kernels = &inst.kernels;
    let n_steps = inst.n_steps();
    let alpha = kernels.alpha;
    let c_delta = inst.delta / (inst.delta - 1.0);

    let mut bounds = Vec::with_capacity(n_steps);
    let mut max_xi_sum = 0.0_f64;
    let mut max_eta = 0.0_f64;
    let mut max_zeta_sum = 0.0_f64;
    for n in 1..=n_steps {
        let mut xi_sum = 0.0;
        let mut zeta_sum = 0.0;
        for i in 1..=n {
            let p = kernels.p(n, i);
            xi_sum += p * inst.xi[i - 1];
            zeta_sum += p * inst.zeta[i - 1] * inst.zeta[i - 1];
        }
        max_xi_sum = max_xi_sum.max(xi_sum);
        max_eta = max_eta.max(inst.eta[n - 1]);
        max_zeta_sum = max_zeta_sum.max(zeta_sum);

        let t_n = kernels.grid.t(n);
        let phi =
            inst.v0 + max_xi_sum + (2.0 * t_n.powf(alpha)).sqrt() * max_eta + max_zeta_sum.sqrt();
        let lambda_n = lambda_envelope(kernels, inst.capital_lambda, n);
        let ln_ml = mittag_leffler_ln(alpha, c_delta * lambda_n * t_n.powf(alpha))?;
        bounds.push(c_delta * ln_ml.exp() * phi);
    }
    Ok(bounds)
}

/// Constructs the sequence `v⁰, …, vᴺ` that satisfies the Grönwall hypothesis
/// of `inst` with *equality* at every step — the extremal input for which the
/// bound from [`gronwall_bound`] must still hold.
pub fn saturate_recurrence(inst: &DfgiInstance) -> Result<Vec<f64>> {
    inst.validate()?;
    let kernels = &inst.kernels;
    let n_steps = inst.n_steps();

    // w[j] = (vʲ)²
    let mut w = Vec::with_capacity(n_steps + 1);
    let mut v = Vec::with_capacity(n_steps + 1);
    w.push(inst.v0 * inst.v0);
    v.push(inst.v0);
    for n in 1..=n_steps {
        let row = &inst.lambda[n - 1];
        // Rearranged equality:
        //   (Kⁿⁿ − λⁿ₀) (vⁿ)² − ξⁿ vⁿ − Bₙ = 0,
        // where Bₙ collects all history terms and is non-negative by kernel
        // monotonicity and the sign constraints on the data.
        let mut b = kernels.k(n, 1) * w[0] + inst.eta[n - 1].powi(2) + inst.zeta[n - 1].powi(2);
        for j in 1..n {
            b += (kernels.k(n, j + 1) - kernels.k(n, j)) * w[j];
        }
        for (i, &wi) in w.iter().enumerate() {
            b += row[n - i] * wi;
        }
        b = b.max(0.0);
        let a = kernels.k(n, n) - row[0];
        if a <= 0.0 {
            return Err(Error::HypothesisViolation(format!(
                "zero-lag weight {} at step {n} is not dominated by K^{{n,n}} = {}",
                row[0],
                kernels.k(n, n)
            )));
        }
        let xi = inst.xi[n - 1];
        let vn = (xi + (xi * xi + 4.0 * a * b).sqrt()) / (2.0 * a);
        v.push(vn);
        w.push(vn * vn);
    }
    Ok(v)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sym_matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

fn check_history_shapes(kernels: &KernelTable, phis: &[Vec<f64>]) -> Result<usize> {
    let n_steps = kernels.n_steps();
    if phis.len() != n_steps + 1 {
        return Err(Error::ShapeMismatch(format!(
            "history has {} states, expected {}",
            phis.len(),
            n_steps + 1
        )));
    }
    let dim = phis[0].len();
    if dim == 0 {
        return Err(Error::ShapeMismatch("history states are empty".into()));
    }
    if phis.iter().any(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch(
            "history states have inconsistent dimensions".into(),
        ));
    }
    Ok(dim)
}

fn check_symmetric_matrix(m: &[Vec<f64>], dim: usize) -> Result<()> {
    if m.len() != dim || m.iter().any(|row| row.len() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "weight matrix is not {dim}x{dim}"
        )));
    }
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(
                    "weight matrix is not symmetric".into(),
                ));
            }
        }
    }
    // In-place Cholesky as a positive-definiteness test.
    let mut l = m.to_vec();
    for k in 0..dim {
        for j in 0..k {
            let ljk = l[k][j];
            for i in k..dim {
                l[i][k] -= l[i][j] * ljk;
            }
        }
        if l[k][k] <= 0.0 {
            return Err(Error::InvalidParameter(
                "weight matrix is not positive definite".into(),
            ));
        }
        let d = l[k][k].sqrt();
        for i in k..dim {
            l[i][k] /= d;
        }
    }
    Ok(())
}

/// Signed margins `(Dᵅφⁿ, φⁿ) − ½ Dᵅ‖φⁿ‖²` for `n = 1..=N`.
///
/// Every margin is non-negative in exact arithmetic for any history; values
/// below roughly `-1e-12 × scale` indicate a broken kernel table.
pub fn check_lemma31_plain(kernels: &KernelTable, phis: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_history_shapes(kernels, phis)?;
    let n_steps = kernels.n_steps();
    let norms_sq: Vec<f64> = phis.iter().map(|p| dot(p, p)).collect();
    let mut margins = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let mut inner = 0.0;
        let mut deriv_sq = 0.0;
        for j in 1..=n {
            let k = kernels.k(n, j);
            let diff: f64 = phis[j]
                .iter()
                .zip(&phis[j - 1])
                .zip(&phis[n])
                .map(|((a, b), c)| (a - b) * c)
                .sum();
            inner += k * diff;
            deriv_sq += k * (norms_sq[j] - norms_sq[j - 1]);
        }
        margins.push(inner - 0.5 * deriv_sq);
    }
    Ok(margins)
}

/// Signed margins for the weighted variant of the fractional-derivative
/// inequality with a time-dependent symmetric positive definite weight
/// `B(t)`:
///
/// ```text
/// ½ Dᵅ ⦀φⁿ⦀²ₙ ≤ (Dᵅ(Bφ)ⁿ, φⁿ) + L_B t_n^{1-α} / (2 β₀ Γ(2-α)) ⦀φⁿ⦀²ₙ,
/// ```
///
/// where `⦀φ⦀²ⱼ = φᵀ Bʲ φ`, `L_B` is a Lipschitz constant of `t ↦ B(t)` in
/// the spectral norm, and `β₀ > 0` a uniform lower spectral bound. `bs[j]`
/// must be the weight matrix at time `t_j` for `j = 0..=N`.
pub fn check_lemma31_weighted(
    kernels: &KernelTable,
    phis: &[Vec<f64>],
    bs: &[Vec<Vec<f64>>],
    l_b: f64,
    beta0: f64,
) -> Result<Vec<f64>> {
    let dim = check_history_shapes(kernels, phis)?;
    let n_steps = kernels.n_steps();
    if bs.len() != n_steps + 1 {
        return Err(Error::ShapeMismatch(format!(
            "weight history has {} matrices, expected {}",
            bs.len(),
            n_steps + 1
        )));
    }
    if beta0 <= 0.0 || l_b < 0.0 {
        return Err(Error::InvalidParameter(
            "beta0 must be positive and l_b non-negative".into(),
        ));
    }
    for m in bs {
        check_symmetric_matrix(m, dim)?;
    }
    let alpha = kernels.alpha;
    // bphi[j] = Bʲ φʲ,  wnorm_sq[j] = ⦀φʲ⦀²ⱼ
    let bphi: Vec<Vec<f64>> = phis
        .iter()
        .zip(bs)
        .map(|(p, b)| sym_matvec(b, p))
        .collect();
    let wnorm_sq: Vec<f64> = phis.iter().zip(&bphi).map(|(p, bp)| dot(p, bp)).collect();
    let mut margins = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let mut inner = 0.0;
        let mut deriv_sq = 0.0;
        for j in 1..=n {
            let k = kernels.k(n, j);
            let diff: f64 = bphi[j]
                .iter()
                .zip(&bphi[j - 1])
                .zip(&phis[n])
                .map(|((a, b), c)| (a - b) * c)
                .sum();
            inner += k * diff;
            deriv_sq += k * (wnorm_sq[j] - wnorm_sq[j - 1]);
        }
        let t_n = kernels.grid.t(n);
        let pollution =
            l_b * t_n.powf(1.0 - alpha) / (2.0 * beta0 * gamma(2.0 - alpha)) * wnorm_sq[n];
        margins.push(inner + pollution - 0.5 * deriv_sq);
    }
    Ok(margins)
}

/// Which stability estimate a [`StabilityReport`] certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityKind {
    /// L² bound on the scalar unknown.
    Solution,
    /// L² bound on the flux.
    Flux,
}

/// Uniform bounds on the PDE coefficients entering the stability constants.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientBounds {
    /// `sup bᵀ A⁻¹ b` over space and time.
    pub b_tilde_max: f64,
    /// `sup max(0, −c)` over space and time.
    pub c_tilde_max: f64,
    /// `sup |c|` over space and time.
    pub c_c: f64,
    /// Coupling coefficient `λ` of the integral term.
    pub lambda_coupling: f64,
    /// L² operator-norm bound `C_ℐ` of the integral operator.
    pub c_integral: f64,
    /// Lower spectral bound `β₀` of `A(x,t)⁻¹`.
    pub beta0: f64,
    /// Upper spectral bound `γ₀` of `A(x,t)⁻¹`.
    pub gamma0: f64,
    /// Lipschitz constant `L_B` of `t ↦ A(·,t)⁻¹` in the spectral norm.
    pub l_b: f64,
}

/// Data needed to evaluate a stability envelope against computed norms.
#[derive(Debug, Clone)]
pub struct StabilityInputs<'a> {
    /// Discrete kernels and the grid they were built on.
    pub kernels: &'a KernelTable,
    /// Coefficient bounds for the problem being certified.
    pub coeffs: CoefficientBounds,
    /// Splitting parameter `ε > 0` used by the estimates.
    pub epsilon: f64,
    /// Margin parameter `δ > 1`.
    pub delta: f64,
    /// `‖u⁰‖`.
    pub u0_norm: f64,
    /// `‖σ⁰‖` (only used by the flux bound).
    pub sigma0_norm: f64,
    /// Computed norms `‖uⁿ‖` (or `‖σⁿ‖`) for `n = 1..=N`.
    pub norms: Vec<f64>,
    /// Extrapolated load norms `‖Efⁿ‖` for `n = 1..=N`.
    pub ef_norms: Vec<f64>,
}

/// One per-step row of a stability certificate.
#[derive(Debug, Clone, Copy)]
pub struct StabilityRow {
    /// Step index `n`.
    pub n: usize,
    /// Time `t_n`.
    pub t_n: f64,
    /// Computed norm at step `n`.
    pub norm: f64,
    /// Stability bound (may be `+∞` if it overflows `f64`).
    pub bound: f64,
    /// Natural log of the bound (always finite unless the data vanish).
    pub ln_bound: f64,
    /// Whether `norm ≤ bound`.
    pub pass: bool,
}

/// Outcome of evaluating a stability estimate on a computed trajectory.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Which estimate was evaluated.
    pub kind: StabilityKind,
    /// Per-step comparisons for `n = 1..=N`.
    pub rows: Vec<StabilityRow>,
    /// Whether every row passed.
    pub all_pass: bool,
    /// Whether the maximum-step condition held.
    pub step_condition_ok: bool,
    /// Largest time step on the grid.
    pub dt_max: f64,
    /// Admissible threshold `(δ λ Γ(2-α))^{-1/α}` for the step size.
    pub dt_threshold: f64,
    /// Rate constant in the step condition (`λ^S` or `λ^F_ε`).
    pub lambda_rate: f64,
    /// Row-sum constant (`Λ^S`, or `λ^F_ε` for the flux bound).
    pub lambda_row_sum: f64,
    /// Mesh-independent envelope `Λ_∞` obtained from the step-ratio bound.
    pub lambda_infinity: f64,
}

impl StabilityReport {
    /// Renders the report as CSV with columns `n,t_n,norm,bound,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t_n,norm,bound,pass\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{}\n",
                row.n, row.t_n, row.norm, row.bound, row.pass
            ));
        }
        out
    }
}

fn validate_stability_inputs(inputs: &StabilityInputs<'_>) -> Result<()> {
    let n = inputs.kernels.n_steps();
    if inputs.epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    if inputs.delta <= 1.0 {
        return Err(Error::InvalidParameter("delta must exceed 1".into()));
    }
    if inputs.norms.len() != n || inputs.ef_norms.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "norms/ef_norms must have length {n}"
        )));
    }
    let c = &inputs.coeffs;
    if c.beta0 <= 0.0 || c.gamma0 < c.beta0 {
        return Err(Error::InvalidParameter(
            "need 0 < beta0 <= gamma0 for the diffusion bounds".into(),
        ));
    }
    if c.b_tilde_max < 0.0 || c.c_tilde_max < 0.0 || c.c_c < 0.0 || c.c_integral < 0.0 || c.l_b < 0.0
    {
        return Err(Error::InvalidParameter(
            "coefficient bounds must be non-negative".into(),
        ));
    }
    Ok(())
}

/// Step ratio `μ_{n_α+1}` entering the extrapolation-related constants;
/// `0` when the grid never leaves the single-step extrapolation regime.
fn mu_star(kernels: &KernelTable) -> f64 {
    let n_next = kernels.n_alpha + 1;
    if n_next >= 2 && n_next <= kernels.n_steps() {
        kernels.grid.mu(n_next)
    } else {
        0.0
    }
}

fn finite_bound(ln_bound: f64) -> f64 {
    if ln_bound > 709.0 {
        f64::INFINITY
    } else {
        ln_bound.exp()
    }
}

/// Evaluates the L² stability envelope for the scalar unknown,
///
/// ```text
/// ‖uⁿ‖ ≤ 2 C_δ E_α(C_δ Λⁿ_S t_nᵅ) ( ‖u⁰‖ + max_j Σᵢ Pʲ⁽ⁱ⁾ ‖Efⁱ‖ ),
/// ```
///
/// against the supplied norms.
pub fn stability_bound_solution(inputs: &StabilityInputs<'_>) -> Result<StabilityReport> {
    validate_stability_inputs(inputs)?;
    let kernels = inputs.kernels;
    let alpha = kernels.alpha;
    let c = &inputs.coeffs;
    let eps = inputs.epsilon;
    let c_delta = inputs.delta / (inputs.delta - 1.0);
    let abs_lambda = c.lambda_coupling.abs();

    let lambda_rate = 0.5 * c.b_tilde_max + 2.0 * c.c_tilde_max + eps * abs_lambda;
    let mu = mu_star(kernels);
    let lambda_row_sum = lambda_rate
        + 2.0 / eps * abs_lambda * c.c_integral * c.c_integral * ((1.0 + mu).powi(2) + mu * mu);
    let lambda_infinity = if kernels.n_alpha < kernels.n_steps() {
        lambda_row_sum * (1.0 + mu.powf(alpha) / alpha)
    } else {
        lambda_row_sum
    };

    let dt_max = kernels.grid.max_dt();
    let dt_threshold = step_threshold(alpha, inputs.delta, lambda_rate);
    let step_condition_ok = dt_max <= dt_threshold * (1.0 + 1e-12);

    let n_steps = kernels.n_steps();
    let mut rows = Vec::with_capacity(n_steps);
    let mut max_load = 0.0_f64;
    for n in 1..=n_steps {
        let mut load = 0.0;
        for i in 1..=n {
            load += kernels.p(n, i) * inputs.ef_norms[i - 1];
        }
        max_load = max_load.max(load);
        let phi = inputs.u0_norm + max_load;
        let t_n = kernels.grid.t(n);
        let lambda_n = match kernels.max_p_diag_ratio(n) {
            Some(r) => lambda_row_sum * (1.0 + r),
            None => lambda_row_sum,
        };
        let ml_ln = mittag_leffler_ln(alpha, c_delta * lambda_n * t_n.powf(alpha))?;
        let ln_bound = (2.0 * c_delta).ln() + ml_ln + phi.ln();
        let bound = finite_bound(ln_bound);
        let norm = inputs.norms[n - 1];
        rows.push(StabilityRow {
            n,
            t_n,
            norm,
            bound,
            ln_bound,
            pass: norm <= bound,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(StabilityReport {
        kind: StabilityKind::Solution,
        rows,
        all_pass,
        step_condition_ok,
        dt_max,
        dt_threshold,
        lambda_rate,
        lambda_row_sum,
        lambda_infinity,
    })
}

/// Evaluates the L² stability envelope for the flux,
///
/// ```text
/// ‖σⁿ‖ ≤ C_F E_α(C_δ Λⁿ_F t_nᵅ) ( ‖σ⁰‖ + ‖u⁰‖ + max_j ( ‖Efʲ‖ + Σᵢ Pʲ⁽ⁱ⁾ ‖Efⁱ‖ ) ),
/// ```
///
/// against the supplied norms. `C_F` itself contains a Mittag-Leffler factor
/// driven by the solution-bound constants and is evaluated in the log domain.
pub fn stability_bound_flux(inputs: &StabilityInputs<'_>) -> Result<StabilityReport> {
    validate_stability_inputs(inputs)?;
    let kernels = inputs.kernels;
    let alpha = kernels.alpha;
    let c = &inputs.coeffs;
    let eps = inputs.epsilon;
    let c_delta = inputs.delta / (inputs.delta - 1.0);
    let abs_lambda = c.lambda_coupling.abs();
    let t_final = kernels.grid.t_final;

    let lambda_rate = 0.5 * (1.0 + eps) * c.b_tilde_max
        + c.l_b * t_final.powf(1.0 - alpha) / (c.beta0 * gamma(2.0 - alpha));
    let mu = mu_star(kernels);
    let lambda_infinity = if kernels.n_alpha < kernels.n_steps() {
        lambda_rate * (1.0 + mu.powf(alpha) / alpha)
    } else {
        lambda_rate
    };

    // Solution-bound row-sum constant, needed inside C_F.
    let lambda_rate_u = 0.5 * c.b_tilde_max + 2.0 * c.c_tilde_max + eps * abs_lambda;
    let lambda_row_sum_u = lambda_rate_u
        + 2.0 / eps * abs_lambda * c.c_integral * c.c_integral * ((1.0 + mu).powi(2) + mu * mu);
    let lambda_infinity_u = if kernels.n_alpha < kernels.n_steps() {
        lambda_row_sum_u * (1.0 + mu.powf(alpha) / alpha)
    } else {
        lambda_row_sum_u
    };

    // ln C_F via a log-domain max over the four candidates.
    let half_ln_load_factor = 0.5 * (2.0 * t_final.powf(alpha) * (1.0 + eps) / (2.0 * eps)).ln();
    let ml_ln_u = mittag_leffler_ln(alpha, c_delta * lambda_infinity_u * t_final.powf(alpha))?;
    let zero_order = c.c_c + c.c_integral * abs_lambda * (1.0 + 2.0 * mu);
    let mut ln_max = 0.0_f64.max(0.5 * c.gamma0.ln()).max(half_ln_load_factor);
    if zero_order > 0.0 {
        ln_max = ln_max.max(c_delta.ln() + ml_ln_u + half_ln_load_factor + zero_order.ln());
    }
    let ln_c_f = (c_delta / c.beta0.sqrt()).ln() + ln_max;

    let dt_max = kernels.grid.max_dt();
    let dt_threshold = step_threshold(alpha, inputs.delta, lambda_rate);
    let step_condition_ok = dt_max <= dt_threshold * (1.0 + 1e-12);

    let n_steps = kernels.n_steps();
    let mut rows = Vec::with_capacity(n_steps);
    let mut max_load = 0.0_f64;
    for n in 1..=n_steps {
        let mut load = inputs.ef_norms[n - 1];
        for i in 1..=n {
            load += kernels.p(n, i) * inputs.ef_norms[i - 1];
        }
        max_load = max_load.max(load);
        let phi = inputs.sigma0_norm + inputs.u0_norm + max_load;
        let t_n = kernels.grid.t(n);
        let lambda_n = match kernels.max_p_diag_ratio(n) {
            Some(r) => lambda_rate * (1.0 + r),
            None => lambda_rate,
        };
        let ml_ln = mittag_leffler_ln(alpha, c_delta * lambda_n * t_n.powf(alpha))?;
        let ln_bound = ln_c_f + ml_ln + phi.ln();
        let bound = finite_bound(ln_bound);
        let norm = inputs.norms[n - 1];
        rows.push(StabilityRow {
            n,
            t_n,
            norm,
            bound,
            ln_bound,
            pass: norm <= bound,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(StabilityReport {
        kind: StabilityKind::Flux,
        rows,
        all_pass,
        step_condition_ok,
        dt_max,
        dt_threshold,
        lambda_rate,
        lambda_row_sum: lambda_rate,
        lambda_infinity,
    })
}
