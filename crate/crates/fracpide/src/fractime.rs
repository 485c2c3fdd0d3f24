//! Graded temporal meshes, L1 discrete kernels, complementary kernels, the
//! extrapolation operator, and the special functions they require.
//!
//! The L1 approximation of the Caputo derivative on a partition
//! `0 = t_0 < t_1 < … < t_N = T` reads
//!
//! ```text
//! D^α_{t_n} φ = Σ_{j=1}^n K^{n,j} (φ^j − φ^{j−1}),
//! K^{n,j} = ((t_n−t_{j−1})^{1−α} − (t_n−t_j)^{1−α}) / (Γ(2−α) Δt_j),
//! ```
//!
//! and the complementary kernels `P^{n,j}` are the discrete inverse of the
//! `K` table, normalised so that `Σ_{j=i}^n P^{n,j} K^{j,i} = 1`. They are the
//! summation weights of the discrete fractional Gronwall inequality and of
//! the stability bounds.

use crate::{Error, Result};

/// Gamma function (Lanczos approximation, relative error well below 1e-13 on
/// the range used here). Internal utility.
#[inline]
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// The kernel `k_β(t) = t^{β−1} / Γ(β)` of the fractional calculus.
#[inline]
pub fn k_beta(beta: f64, t: f64) -> f64 {
    t.powf(beta - 1.0) / gamma(beta)
}

/// A graded partition `t_n = (n/N)^γ T` of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedTimeGrid {
    /// Number of steps `N ≥ 1`.
    pub n_steps: usize,
    /// Grading exponent `γ ≥ 1`; `γ = 1` is the uniform mesh.
    pub gamma: f64,
    /// Final time `T > 0`.
    pub t_final: f64,
    /// Nodes `t_0 … t_N` (length `N+1`).
    pub times: Vec<f64>,
    /// Step sizes `Δt_1 … Δt_N` (length `N`).
    pub steps: Vec<f64>,
    /// Step ratios `μ_2 … μ_N`, `μ_n = Δt_n/Δt_{n−1}` (length `N−1`).
    pub ratios: Vec<f64>,
}

impl GradedTimeGrid {
    /// Node `t_n`, `0 ≤ n ≤ N`.
    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        self.times[n]
    }

    /// Step `Δt_n = t_n − t_{n−1}`, `1 ≤ n ≤ N`.
    #[inline]
    pub fn dt(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    /// Ratio `μ_n = Δt_n / Δt_{n−1}`, `2 ≤ n ≤ N`.
    #[inline]
    pub fn mu(&self, n: usize) -> f64 {
        self.ratios[n - 2]
    }

    /// Largest step size.
    pub fn max_dt(&self) -> f64 {
        self.steps.iter().cloned().fold(0.0, f64::max)
    }
}

/// Build the graded partition `t_n = (n/N)^γ T`.
///
/// Errors on `N = 0`, `γ < 1` or `T ≤ 0`.
pub fn build_graded_grid(n_steps: usize, gamma_exp: f64, t_final: f64) -> Result<GradedTimeGrid> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("time grid needs N >= 1".into()));
    }
    if !(gamma_exp >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grading exponent must satisfy gamma >= 1, got {gamma_exp}"
        )));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    let n = n_steps;
    let times: Vec<f64> = (0..=n)
        .map(|k| (k as f64 / n as f64).powf(gamma_exp) * t_final)
        .collect();
    let steps: Vec<f64> = (1..=n).map(|k| times[k] - times[k - 1]).collect();
    let ratios: Vec<f64> = (2..=n).map(|k| steps[k - 1] / steps[k - 2]).collect();
    Ok(GradedTimeGrid {
        n_steps: n,
        gamma: gamma_exp,
        t_final,
        times,
        steps,
        ratios,
    })
}

/// Lower-triangular tables of the L1 kernels `K^{n,j}` and complementary
/// kernels `P^{n,j}` for one grid and one fractional order.
#[derive(Debug, Clone)]
pub struct KernelTable {
    /// Fractional order `α ∈ (0,1)`.
    pub alpha: f64,
    /// The grid the tables were built on (owned copy; grids are small).
    pub grid: GradedTimeGrid,
    /// `K^{n,j}` stored as row `n` (1-based) = `k[n−1]`, entries `j = 1..=n`.
    k: Vec<Vec<f64>>,
    /// `P^{n,j}` stored in the same layout.
    p: Vec<Vec<f64>>,
    /// The extrapolation switch index `n_α = min(⌊1/α⌋, N)`.
    pub n_alpha: usize,
}

impl KernelTable {
    /// L1 kernel `K^{n,j}`, `1 ≤ j ≤ n ≤ N`.
    #[inline]
    pub fn k(&self, n: usize, j: usize) -> f64 {
        self.k[n - 1][j - 1]
    }

    /// Complementary kernel `P^{n,j}`, `1 ≤ j ≤ n ≤ N`.
    #[inline]
    pub fn p(&self, n: usize, j: usize) -> f64 {
        self.p[n - 1][j - 1]
    }

    /// Number of steps of the underlying grid.
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    /// `max_{n_α+1 ≤ j ≤ n} P^{j,j}/P^{j,j−1}`, the factor entering the
    /// second branch of `Λ_n`; `None` when no index is in range.
    pub fn max_p_diag_ratio(&self, n: usize) -> Option<f64> {
        let lo = self.n_alpha + 1;
        if n < lo || lo < 2 {
            return None;
        }
        Some(
            (lo..=n)
                .map(|j| self.p(j, j) / self.p(j, j - 1))
                .fold(f64::MIN, f64::max),
        )
    }
}

/// Stable evaluation of `a^e − b^e` for `a = b + d ≥ b ≥ 0`, `d ≥ 0`,
/// `e ∈ (0,1)`. Direct subtraction cancels catastrophically when `d ≪ b`;
/// factoring through `expm1(e·ln1p(d/b))` keeps full relative accuracy.
#[inline]
fn power_difference(b: f64, d: f64, e: f64) -> f64 {
    if b == 0.0 {
        d.powf(e)
    } else {
        b.powf(e) * (e * (d / b).ln_1p()).exp_m1()
    }
}

/// Build the kernel tables for a grid and order `α ∈ (0,1)`.
///
/// `K` is computed through the stable power difference above (not by
/// quadrature), so the identity `Σ_j P^{n,j} K^{j,i} = 1` holds to near
/// machine precision; `P` is computed by the defining backward recursion
/// `P^{n,n} = 1/K^{n,n}`,
/// `P^{n,i} = (1/K^{i,i}) Σ_{j=i+1}^n P^{n,j}(K^{j,i+1} − K^{j,i})`.
pub fn build_kernels(grid: &GradedTimeGrid, alpha: f64) -> Result<KernelTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0,1), got {alpha}"
        )));
    }
    let n = grid.n_steps;
    let e = 1.0 - alpha;
    let g2a = gamma(2.0 - alpha);

    // K^{n,j} = ((t_n−t_{j−1})^{1−α} − (t_n−t_j)^{1−α}) / (Γ(2−α) Δt_j).
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(n);
    for row in 1..=n {
        let tn = grid.t(row);
        let mut r = Vec::with_capacity(row);
        for j in 1..=row {
            let b = tn - grid.t(j);
            let d = grid.dt(j);
            r.push(power_difference(b, d, e) / (g2a * d));
        }
        k.push(r);
    }

    // Backward recursion for P.
    let mut p: Vec<Vec<f64>> = (1..=n).map(|row| vec![0.0; row]).collect();
    for row in 1..=n {
        p[row - 1][row - 1] = 1.0 / k[row - 1][row - 1];
        for i in (1..row).rev() {
            let mut s = 0.0;
            for j in (i + 1)..=row {
                s += p[row - 1][j - 1] * (k[j - 1][i] - k[j - 1][i - 1]);
            }
            p[row - 1][i - 1] = s / k[i - 1][i - 1];
        }
    }

    // n_α = ⌊1/α⌋ exactly: 1/α is floored as written; values within one ulp
    // of an integer (α = 1/k represented inexactly) round to that integer.
    let r = 1.0 / alpha;
    let n_alpha_raw = if (r - r.round()).abs() < 1e-9 {
        r.round() as usize
    } else {
        r.floor() as usize
    };
    let n_alpha = n_alpha_raw.min(n);

    Ok(KernelTable {
        alpha,
        grid: grid.clone(),
        k,
        p,
        n_alpha,
    })
}

/// The L1 discrete fractional derivative
/// `D^α_{t_n} φ = Σ_{j=1}^n K^{n,j}(φ^j − φ^{j−1})` of a scalar history.
///
/// `history` must contain `φ^0 … φ^n` (length at least `n+1`).
pub fn l1_derivative(history: &[f64], kernels: &KernelTable, n: usize) -> Result<f64> {
    if n == 0 || n > kernels.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "step index {n} outside 1..={}",
            kernels.n_steps()
        )));
    }
    if history.len() < n + 1 {
        return Err(Error::ShapeMismatch(format!(
            "history has {} entries, need at least {}",
            history.len(),
            n + 1
        )));
    }
    Ok((1..=n)
        .map(|j| kernels.k(n, j) * (history[j] - history[j - 1]))
        .sum())
}

/// Componentwise [`l1_derivative`] for DOF-vector histories.
pub fn l1_derivative_vec(history: &[Vec<f64>], kernels: &KernelTable, n: usize) -> Result<Vec<f64>> {
    if n == 0 || n > kernels.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "step index {n} outside 1..={}",
            kernels.n_steps()
        )));
    }
    if history.len() < n + 1 {
        return Err(Error::ShapeMismatch(format!(
            "history has {} entries, need at least {}",
            history.len(),
            n + 1
        )));
    }
    let dim = history[0].len();
    if history.iter().any(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch("history vectors differ in length".into()));
    }
    let mut out = vec![0.0; dim];
    for j in 1..=n {
        let w = kernels.k(n, j);
        let (cur, prev) = (&history[j], &history[j - 1]);
        for (o, (a, b)) in out.iter_mut().zip(cur.iter().zip(prev.iter())) {
            *o += w * (a - b);
        }
    }
    Ok(out)
}

/// Extrapolation weights `(w_{n−1}, w_{n−2})` so that
/// `Eφ^n = w_{n−1} φ^{n−1} + w_{n−2} φ^{n−2}`.
///
/// For `1 ≤ n ≤ n_α` the operator degrades to the one-step lag `φ^{n−1}`;
/// for `n ≥ n_α + 1` it is the two-point extrapolation
/// `(1+μ_n) φ^{n−1} − μ_n φ^{n−2}`.
pub fn extrapolation_weights(kernels: &KernelTable, n: usize) -> Result<(f64, f64)> {
    if n == 0 || n > kernels.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "step index {n} outside 1..={}",
            kernels.n_steps()
        )));
    }
    if n <= kernels.n_alpha {
        Ok((1.0, 0.0))
    } else {
        let mu = kernels.grid.mu(n);
        Ok((1.0 + mu, -mu))
    }
}

/// Extrapolated value `Eφ^n` of a scalar history `φ^0 … φ^{n−1}`.
pub fn extrapolate(history: &[f64], kernels: &KernelTable, n: usize) -> Result<f64> {
    let (w1, w2) = extrapolation_weights(kernels, n)?;
    if history.len() < n {
        return Err(Error::ShapeMismatch(format!(
            "history has {} entries, need at least {n}",
            history.len()
        )));
    }
    let prev = history[n - 1];
    let prev2 = if n >= 2 { history[n - 2] } else { 0.0 };
    Ok(w1 * prev + w2 * prev2)
}

/// Reliable-range limits of [`mittag_leffler`].
pub const ML_MAX_ABS_Z: f64 = 100.0;
/// Smallest order accepted by [`mittag_leffler`].
pub const ML_MIN_ALPHA: f64 = 0.05;

/// The Mittag-Leffler function `E_α(z) = Σ_{j≥0} z^j / Γ(jα + 1)`.
///
/// Evaluated by the defining power series with term-ratio stopping at
/// relative `1e−16`. Documented reliable range: `|z| ≤ 100` and
/// `α ∈ [0.05, 1]`; arguments outside are rejected with a range error.
/// Values exceeding the f64 range return `+∞` (e.g. `E_0.2(50)`); callers
/// needing such magnitudes should use [`mittag_leffler_ln`].
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha >= ML_MIN_ALPHA && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "Mittag-Leffler order must lie in [{ML_MIN_ALPHA}, 1], got {alpha}"
        )));
    }
    if !(z.abs() <= ML_MAX_ABS_Z) {
        return Err(Error::OutOfRange(format!(
            "Mittag-Leffler argument |z| <= {ML_MAX_ABS_Z} required, got {z}"
        )));
    }
    if z >= 0.0 {
        let ln = mittag_leffler_ln(alpha, z)?;
        return Ok(ln.exp());
    }
    // Negative arguments: direct alternating summation. In the accepted
    // range the summands stay modest, so cancellation is tame.
    let mut sum = 1.0;
    for j in 1..10_000 {
        let term = z.powi(j) / gamma(alpha * j as f64 + 1.0);
        let new = sum + term;
        if (new - sum).abs() <= 1e-16 * new.abs().max(1.0) && j as f64 > 1.0 / alpha {
            return Ok(new);
        }
        sum = new;
    }
    Ok(sum)
}

/// `ln E_α(z)` for `z ≥ 0`, valid far beyond f64 overflow of `E_α` itself.
///
/// The defining series is summed in log space (log-sum-exp) while its peak
/// term is representable; once `z^{1/α} > 700` the dominant-term asymptotic
/// `ln E_α(z) ≈ z^{1/α} − ln α` takes over, whose neglected terms are
/// `O(e^{−z^{1/α}})` relatively — far below any tolerance used here. This is
/// the evaluator behind the Gronwall/stability bounds, which are honest but
/// astronomically large for strongly coupled problems.
pub fn mittag_leffler_ln(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "Mittag-Leffler order must lie in (0, 1], got {alpha}"
        )));
    }
    if !(z >= 0.0) {
        return Err(Error::OutOfRange(format!(
            "log-domain Mittag-Leffler needs z >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let spectral = z.powf(1.0 / alpha);
    if spectral > 700.0 {
        return Ok(spectral - alpha.ln());
    }
    // Peak term index ~ z^{1/α}/α ≤ 700/α; sum everything that matters.
    let lnz = z.ln();
    let peak = (spectral / alpha).ceil() as usize;
    let jmax = (2 * peak + 60).min(2_000_000);
    // ln a_j = j ln z − lnΓ(jα+1); log-sum-exp against the running max.
    let mut lnterms = Vec::with_capacity(jmax + 1);
    let mut m = f64::MIN;
    let mut tail_below = 0usize;
    for j in 0..=jmax {
        let lt = j as f64 * lnz - ln_gamma(alpha * j as f64 + 1.0);
        if lt > m {
            m = lt;
        }
        lnterms.push(lt);
        // Stop once terms are negligible relative to the peak seen so far
        // and we are past the peak.
        if lt < m - 45.0 {
            tail_below += 1;
            if tail_below > 3 {
                break;
            }
        } else {
            tail_below = 0;
        }
    }
    let s: f64 = lnterms.iter().map(|&lt| (lt - m).exp()).sum();
    Ok(m + s.ln())
}

/// Analytic Caputo derivative of the power `t^β`:
/// `∂^α_t t^β = Γ(1+β)/Γ(1+β−α) · t^{β−α}` (and `0` for `β = 0`).
///
/// Used to manufacture sources for the catalog's exact solutions, whose time
/// factors are sums of such powers.
pub fn caputo_power(beta: f64, alpha: f64, t: f64) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0); // Caputo derivative of a constant
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power rule needs beta > 0, got {beta}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0,1), got {alpha}"
        )));
    }
    if t == 0.0 {
        // t^{β−α} → 0 for β > α, 1 for β = α, +∞ for β < α.
        return Ok(if beta > alpha {
            0.0
        } else if beta == alpha {
            gamma(1.0 + beta) / gamma(1.0 + beta - alpha)
        } else {
            f64::INFINITY
        });
    }
    Ok(gamma(1.0 + beta) / gamma(1.0 + beta - alpha) * t.powf(beta - alpha))
}
