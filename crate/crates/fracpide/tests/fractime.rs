//! Tests for graded grids, L1/complementary kernel tables, extrapolation and
//! special functions.

use fracpide::fractime::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
    let denom = expected.abs().max(1e-300);
    assert!(
        ((actual - expected) / denom).abs() <= tol,
        "{what}: got {actual:.16e}, expected {expected:.16e} (rel tol {tol:e})"
    );
}

// ---------------------------------------------------------------- grid

#[test]
fn uniform_grid_nodes() {
    let g = build_graded_grid(4, 1.0, 1.0).unwrap();
    assert_eq!(g.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn graded_grid_last_steps() {
    // gamma = (2-0.2)/0.2 + 0.1 = 9.1, T = 0.5: published grid step sizes.
    let g = build_graded_grid(4, 9.1, 0.5).unwrap();
    assert_rel(g.dt(4), 4.635e-1, 5e-4, "dt_4 at N=4");
    let g = build_graded_grid(64, 9.1, 0.5).unwrap();
    assert_rel(g.dt(64), 6.675e-2, 5e-4, "dt_64 at N=64, T=0.5");
    // The published T = 1 runs use the same grading.
    let g = build_graded_grid(64, 9.1, 1.0).unwrap();
    assert_rel(g.dt(64), 1.335e-1, 5e-4, "dt_64 at N=64, T=1");
}

#[test]
fn grid_invariants_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..200usize);
        let gamma_exp = rng.gen_range(1.0..10.0);
        let t_final = rng.gen_range(0.1..5.0);
        let g = build_graded_grid(n, gamma_exp, t_final).unwrap();
        assert_eq!(g.times[0], 0.0);
        assert_rel(g.times[n], t_final, 4.0 * f64::EPSILON, "t_N = T");
        for k in 1..=n {
            assert!(g.t(k) > g.t(k - 1), "strictly increasing");
            let exact = (k as f64 / n as f64).powf(gamma_exp) * t_final;
            assert_rel(g.t(k), exact, 4.0 * f64::EPSILON, "t_n formula");
            // Step bound used by the truncation estimates.
            let bound = gamma_exp * t_final * (k as f64).powf(gamma_exp - 1.0)
                / (n as f64).powf(gamma_exp);
            assert!(g.dt(k) <= bound * (1.0 + 1e-12), "dt_n <= gamma T n^(g-1) N^-g");
        }
        for k in 2..=n {
            assert!(g.dt(k) >= g.dt(k - 1) * (1.0 - 1e-14), "steps nondecreasing");
        }
    }
}

#[test]
fn grid_rejects_bad_parameters() {
    assert!(build_graded_grid(0, 1.0, 1.0).is_err());
    assert!(build_graded_grid(4, 0.9, 1.0).is_err());
    assert!(build_graded_grid(4, 1.0, 0.0).is_err());
    assert!(build_graded_grid(4, 1.0, -1.0).is_err());
}

// ---------------------------------------------------------------- kernels

#[test]
fn diagonal_kernel_closed_form() {
    // K^{n,n} = 1/(dt_n^alpha Gamma(2-alpha)); on the unit-step uniform grid
    // with alpha = 1/2 this is 1/Gamma(1.5) = 1.1283791670955126.
    let g = build_graded_grid(4, 1.0, 4.0).unwrap();
    let kt = build_kernels(&g, 0.5).unwrap();
    for n in 1..=4 {
        assert_rel(kt.k(n, n), 1.1283791670955126, 1e-13, "K^{n,n} uniform");
    }
    let g = build_graded_grid(16, 3.1, 0.5).unwrap();
    for alpha in [0.2, 0.5, 0.8, 0.99] {
        let kt = build_kernels(&g, alpha).unwrap();
        for n in 1..=16 {
            let expect = 1.0 / (g.dt(n).powf(alpha) * gamma(2.0 - alpha));
            assert_rel(kt.k(n, n), expect, 1e-12, "K^{n,n} graded");
        }
    }
}

#[test]
fn subdiagonal_kernel_uniform_closed_form() {
    // Uniform grid: K^{n,n-1} = (2^{1-alpha} - 1)/(dt^alpha Gamma(2-alpha)).
    for alpha in [0.2, 0.5, 0.8, 0.99] {
        let g = build_graded_grid(8, 1.0, 2.0).unwrap();
        let kt = build_kernels(&g, alpha).unwrap();
        let dt = g.dt(1);
        let expect = (2f64.powf(1.0 - alpha) - 1.0) / (dt.powf(alpha) * gamma(2.0 - alpha));
        for n in 2..=8 {
            assert_rel(kt.k(n, n - 1), expect, 1e-12, "K^{n,n-1} uniform");
        }
    }
}

#[test]
fn kernel_row_telescopes_to_k2ma() {
    // sum_j K^{n,j} dt_j = t_n^{1-alpha}/Gamma(2-alpha) (telescoping sum).
    let g = build_graded_grid(40, 4.3, 1.7).unwrap();
    let kt = build_kernels(&g, 0.35).unwrap();
    for n in 1..=40 {
        let s: f64 = (1..=n).map(|j| kt.k(n, j) * g.dt(j)).sum();
        let expect = g.t(n).powf(0.65) / gamma(1.65);
        assert_rel(s, expect, 1e-12, "telescoped kernel row");
    }
}

fn check_tables(n: usize, gamma_exp: f64, alpha: f64) {
    let g = build_graded_grid(n, gamma_exp, 1.0).unwrap();
    let kt = build_kernels(&g, alpha).unwrap();
    let g2a = gamma(2.0 - alpha);
    for row in 1..=n {
        // Monotonicity: 0 < K^{n,j-1} < K^{n,j}.
        for j in 2..=row {
            assert!(kt.k(row, j - 1) > 0.0);
            assert!(
                kt.k(row, j - 1) < kt.k(row, j),
                "kernel monotonicity at n={row}, j={j}"
            );
        }
        // Bound (a): 0 <= P^{n,j} <= Gamma(2-alpha) dt_j^alpha.
        for j in 1..=row {
            let p = kt.p(row, j);
            assert!(p >= 0.0, "P nonnegative");
            assert!(
                p <= g2a * g.dt(j).powf(alpha) * (1.0 + 1e-12),
                "P upper bound at n={row}, j={j}"
            );
        }
        // Complementary identity: sum_{j=i}^n P^{n,j} K^{j,i} = 1.
        for i in 1..=row {
            let s: f64 = (i..=row).map(|j| kt.p(row, j) * kt.k(j, i)).sum();
            assert!(
                (s - 1.0).abs() <= 1e-12,
                "sum P K = 1 failed: n={row}, i={i}, got {s:.16}"
            );
        }
        // Bound (c) for m in {0,1}: sum_j P^{n,j} k_{1+m*alpha-alpha}(t_j)
        //   <= k_{1+m*alpha}(t_n).
        for m in 0..=1usize {
            let beta_lhs = 1.0 + (m as f64) * alpha - alpha;
            let beta_rhs = 1.0 + (m as f64) * alpha;
            let lhs: f64 = (1..=row)
                .map(|j| kt.p(row, j) * k_beta(beta_lhs, g.t(j)))
                .sum();
            let rhs = k_beta(beta_rhs, g.t(row));
            assert!(
                lhs <= rhs * (1.0 + 1e-12),
                "bound (c) m={m} failed at n={row}: {lhs} > {rhs}"
            );
        }
    }
}

#[test]
fn kernel_identities_seeded_triples() {
    // 100 seeded (N, gamma, alpha) triples; this is the criterion-1 suite at
    // test scale (the acceptance target re-runs it with the full budget).
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..30 {
        let n = rng.gen_range(1..=64usize);
        let gamma_exp = rng.gen_range(1.0..=10.0);
        let alpha = rng.gen_range(0.05..=0.99);
        check_tables(n, gamma_exp, alpha);
    }
}

#[test]
fn p_diag_ratio_uniform() {
    // Uniform mesh: P^{n,n}/P^{n,n-1} = 1/(2 - 2^{1-alpha}).
    for alpha in [0.2, 0.5, 0.8, 0.99] {
        let g = build_graded_grid(12, 1.0, 1.0).unwrap();
        let kt = build_kernels(&g, alpha).unwrap();
        let expect = 1.0 / (2.0 - 2f64.powf(1.0 - alpha));
        for n in 2..=12 {
            assert_rel(kt.p(n, n) / kt.p(n, n - 1), expect, 1e-12, "uniform P ratio");
        }
    }
    // alpha = 0.5: the ratio is 1/(2 - sqrt(2)) = 1.7071067811865475.
    let g = build_graded_grid(6, 1.0, 1.0).unwrap();
    let kt = build_kernels(&g, 0.5).unwrap();
    assert_rel(kt.p(4, 4) / kt.p(4, 3), 1.7071067811865475, 1e-12, "ratio 0.5");
}

#[test]
fn p_diag_ratio_graded_bound() {
    // Graded mesh: P^{n,n}/P^{n,n-1} <= mu_n^alpha / alpha.
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let n = rng.gen_range(2..=48usize);
        let gamma_exp = rng.gen_range(1.0..=8.0);
        let alpha = rng.gen_range(0.1..=0.99);
        let g = build_graded_grid(n, gamma_exp, 1.0).unwrap();
        let kt = build_kernels(&g, alpha).unwrap();
        for row in 2..=n {
            let ratio = kt.p(row, row) / kt.p(row, row - 1);
            let bound = g.mu(row).powf(alpha) / alpha;
            assert!(
                ratio <= bound * (1.0 + 1e-12),
                "P ratio bound failed at n={row}: {ratio} > {bound}"
            );
        }
    }
}

#[test]
fn n_alpha_floor() {
    let g = build_graded_grid(64, 1.0, 1.0).unwrap();
    assert_eq!(build_kernels(&g, 0.2).unwrap().n_alpha, 5); // 1/0.2 = 5 exactly
    assert_eq!(build_kernels(&g, 0.5).unwrap().n_alpha, 2);
    assert_eq!(build_kernels(&g, 0.3).unwrap().n_alpha, 3); // floor(3.33)
    assert_eq!(build_kernels(&g, 0.99).unwrap().n_alpha, 1);
    // Capped by N.
    let g4 = build_graded_grid(4, 1.0, 1.0).unwrap();
    assert_eq!(build_kernels(&g4, 0.05).unwrap().n_alpha, 4);
}

#[test]
fn kernels_reject_bad_alpha() {
    let g = build_graded_grid(4, 1.0, 1.0).unwrap();
    assert!(build_kernels(&g, 0.0).is_err());
    assert!(build_kernels(&g, 1.0).is_err());
    assert!(build_kernels(&g, -0.5).is_err());
}

// ---------------------------------------------------------------- L1 operator

#[test]
fn l1_constant_history_is_zero() {
    let g = build_graded_grid(10, 2.5, 1.0).unwrap();
    let kt = build_kernels(&g, 0.4).unwrap();
    let hist = vec![3.25; 11];
    for n in 1..=10 {
        assert_eq!(l1_derivative(&hist, &kt, n).unwrap(), 0.0);
    }
}

#[test]
fn l1_exact_on_linear_data() {
    // L1 is exact on phi(t) = t: D^alpha t = t^{1-alpha}/Gamma(2-alpha).
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let n = rng.gen_range(1..=128usize);
        let gamma_exp = rng.gen_range(1.0..=9.0);
        let alpha = rng.gen_range(0.05..=0.99);
        let g = build_graded_grid(n, gamma_exp, rng.gen_range(0.3..2.0)).unwrap();
        let kt = build_kernels(&g, alpha).unwrap();
        let hist: Vec<f64> = g.times.clone();
        for step in 1..=n {
            let expect = g.t(step).powf(1.0 - alpha) / gamma(2.0 - alpha);
            assert_rel(
                l1_derivative(&hist, &kt, step).unwrap(),
                expect,
                1e-12,
                "L1 on t",
            );
        }
    }
}

#[test]
fn l1_order_on_quadratic_data() {
    // phi(t) = t^2 on uniform grids: error at T vs the Caputo power rule
    // decays with observed order >= 2 - alpha - 0.1.
    for alpha in [0.3, 0.5, 0.8] {
        let mut errs = Vec::new();
        let ns = [16usize, 32, 64, 128];
        for &n in &ns {
            let g = build_graded_grid(n, 1.0, 1.0).unwrap();
            let kt = build_kernels(&g, alpha).unwrap();
            let hist: Vec<f64> = g.times.iter().map(|&t| t * t).collect();
            let exact = caputo_power(2.0, alpha, 1.0).unwrap();
            errs.push((l1_derivative(&hist, &kt, n).unwrap() - exact).abs());
        }
        for w in 1..ns.len() {
            let rate = (errs[w - 1] / errs[w]).ln() / 2f64.ln();
            assert!(
                rate >= 2.0 - alpha - 0.1,
                "L1 order on t^2, alpha={alpha}: rate {rate} between N={} and N={}",
                ns[w - 1],
                ns[w]
            );
        }
    }
}

#[test]
fn l1_vector_matches_scalar() {
    let g = build_graded_grid(6, 2.0, 1.0).unwrap();
    let kt = build_kernels(&g, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let hist: Vec<Vec<f64>> = (0..7)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    for n in 1..=6 {
        let v = l1_derivative_vec(&hist, &kt, n).unwrap();
        for c in 0..3 {
            let s: Vec<f64> = hist.iter().map(|x| x[c]).collect();
            assert_rel(v[c], l1_derivative(&s, &kt, n).unwrap(), 1e-14, "vec L1");
        }
    }
}

#[test]
fn l1_shape_errors() {
    let g = build_graded_grid(5, 1.0, 1.0).unwrap();
    let kt = build_kernels(&g, 0.5).unwrap();
    assert!(l1_derivative(&[0.0, 1.0], &kt, 4).is_err()); // too short
    assert!(l1_derivative(&[0.0; 6], &kt, 0).is_err()); // n = 0
    assert!(l1_derivative(&[0.0; 6], &kt, 6).is_err()); // n > N
}

// ---------------------------------------------------------------- extrapolation

#[test]
fn extrapolation_branches() {
    // alpha = 0.2 gives n_alpha = 5: for n = 3 the one-step lag applies.
    let g = build_graded_grid(16, 9.1, 0.5).unwrap();
    let kt = build_kernels(&g, 0.2).unwrap();
    assert_eq!(kt.n_alpha, 5);
    let hist: Vec<f64> = (0..16).map(|i| i as f64 * 0.5).collect();
    assert_eq!(extrapolate(&hist, &kt, 3).unwrap(), hist[2]);
    // Uniform grid, n > n_alpha: E phi = 2 phi^{n-1} - phi^{n-2}.
    let gu = build_graded_grid(10, 1.0, 1.0).unwrap();
    let ktu = build_kernels(&gu, 0.5).unwrap();
    let h = [1.0, 4.0, 9.0, 16.0, 25.0];
    assert_rel(
        extrapolate(&h, &ktu, 4).unwrap(),
        2.0 * 16.0 - 9.0,
        1e-14,
        "uniform two-point extrapolation",
    );
}

#[test]
fn extrapolation_reproduces_linear() {
    // Linear-in-t data: E phi^n = t_n exactly for n > n_alpha on any grid.
    let g = build_graded_grid(24, 3.1, 0.5).unwrap();
    let kt = build_kernels(&g, 0.5).unwrap();
    let hist: Vec<f64> = g.times.clone();
    for n in (kt.n_alpha + 1)..=24 {
        assert_rel(extrapolate(&hist, &kt, n).unwrap(), g.t(n), 1e-12, "E on t");
    }
}

#[test]
fn extrapolation_rejects_n0() {
    let g = build_graded_grid(4, 1.0, 1.0).unwrap();
    let kt = build_kernels(&g, 0.5).unwrap();
    assert!(extrapolate(&[1.0], &kt, 0).is_err());
}

// ---------------------------------------------------------------- Mittag-Leffler

#[test]
fn ml_basic_values() {
    for alpha in [0.1, 0.35, 0.5, 0.77, 1.0] {
        assert_eq!(mittag_leffler(alpha, 0.0).unwrap(), 1.0);
    }
    for z in [-1.0, 0.5, 3.0] {
        assert_rel(mittag_leffler(1.0, z).unwrap(), z.exp(), 1e-12, "E_1 = exp");
    }
    // E_{1/2}(1) = e * erfc(-1), high-precision oracle value.
    assert_rel(
        mittag_leffler(0.5, 1.0).unwrap(),
        5.008980080762283,
        1e-10,
        "E_0.5(1)",
    );
    // Independent series oracle values.
    assert_rel(
        mittag_leffler(0.3, 2.5).unwrap(),
        5.403757781174881e9,
        1e-10,
        "E_0.3(2.5)",
    );
    assert_rel(
        mittag_leffler(0.7, 10.0).unwrap(),
        6.392956732430171e11,
        1e-10,
        "E_0.7(10)",
    );
    assert_rel(
        mittag_leffler(0.99, 1.0).unwrap(),
        2.7416571893307096,
        1e-10,
        "E_0.99(1)",
    );
}

#[test]
fn ml_monotone_in_z() {
    for alpha in [0.2, 0.5, 0.9] {
        let mut prev = 0.0;
        for k in 0..=40 {
            let z = k as f64 * 0.5;
            let v = mittag_leffler(alpha, z).unwrap();
            assert!(v >= prev, "E_alpha nondecreasing in z >= 0");
            prev = v;
        }
    }
}

#[test]
fn ml_range_errors() {
    assert!(mittag_leffler(0.5, 101.0).is_err());
    assert!(mittag_leffler(0.5, -101.0).is_err());
    assert!(mittag_leffler(0.01, 1.0).is_err());
    assert!(mittag_leffler(1.2, 1.0).is_err());
}

#[test]
fn ml_log_domain_consistency() {
    // Log evaluator agrees with the direct series where both are finite...
    for alpha in [0.3, 0.5, 0.9] {
        for z in [0.0f64, 0.7, 4.0, 12.0] {
            if z.powf(1.0 / alpha) > 600.0 {
                continue; // E_alpha(z) itself overflows f64
            }
            let direct = mittag_leffler(alpha, z).unwrap();
            let viog = mittag_leffler_ln(alpha, z).unwrap().exp();
            assert_rel(viog, direct, 1e-10, "ln-domain vs series");
        }
    }
    // ...and keeps growing (finitely) far beyond f64 overflow of E itself.
    let a = mittag_leffler_ln(0.5, 50.0).unwrap();
    let b = mittag_leffler_ln(0.5, 60.0).unwrap();
    assert!(a.is_finite() && b.is_finite() && b > a);
    assert!(a > 700.0, "E_0.5(50) overflows f64, ln must exceed 700");
    // Asymptotic regime: ln E_alpha(z) ~ z^(1/alpha) - ln(alpha).
    let c = mittag_leffler_ln(0.2, 80.0).unwrap();
    assert_rel(c, 80f64.powf(5.0) - 0.2f64.ln(), 1e-10, "asymptotic branch");
}

// ---------------------------------------------------------------- Caputo power rule

#[test]
fn caputo_power_values() {
    // beta = alpha: derivative is the constant Gamma(1+alpha).
    for alpha in [0.25, 0.5, 0.8] {
        for t in [0.0, 0.3, 1.0, 2.0] {
            assert_rel(
                caputo_power(alpha, alpha, t).unwrap(),
                gamma(1.0 + alpha),
                1e-13,
                "power rule beta=alpha",
            );
        }
    }
    // Quadrature-oracle values (frozen): 1/Gamma(1.5), 6/Gamma(3.5).
    assert_rel(
        caputo_power(1.0, 0.5, 1.0).unwrap(),
        1.1283791670955126,
        1e-13,
        "d^0.5 t at 1",
    );
    assert_rel(
        caputo_power(3.0, 0.5, 1.0).unwrap(),
        1.8054066673528201,
        1e-13,
        "d^0.5 t^3 at 1",
    );
    // 2/Gamma(2.5) scaling for t^2.
    assert_rel(
        caputo_power(2.0, 0.5, 1.0).unwrap(),
        1.5045055561273501,
        1e-13,
        "d^0.5 t^2 at 1",
    );
    assert_eq!(caputo_power(2.0, 0.5, 0.0).unwrap(), 0.0);
    assert_eq!(caputo_power(0.0, 0.5, 0.7).unwrap(), 0.0);
    assert!(caputo_power(-1.0, 0.5, 1.0).is_err());
}

#[test]
fn caputo_power_quadrature_cross_check() {
    // Independent oracle: the Caputo integral
    //   (1/Gamma(1-alpha)) * int_0^t (t-s)^(-alpha) beta s^(beta-1) ds
    // evaluated by substitution s = t*u with a Gauss-Jacobi-free composite
    // midpoint rule in u^(1-alpha) variable; modest accuracy suffices.
    let alpha = 0.5f64;
    let beta = 2.0f64; // integrand (t-s)^(-alpha) * 2s, mildly singular at s=t
    let t = 0.8f64;
    // substitute t - s = v^2 (removes the singularity): ds = -2v dv,
    // integral = int_0^sqrt(t) v^(-1) * 2 (t - v^2) * 2v dv / ... for alpha=1/2.
    let m = 200_000;
    let vmax = t.sqrt();
    let mut s = 0.0;
    for i in 0..m {
        let v = (i as f64 + 0.5) / m as f64 * vmax;
        s += 2.0 * (t - v * v) * 2.0 * (vmax / m as f64);
    }
    let oracle = s / gamma(1.0 - alpha);
    assert_rel(
        caputo_power(beta, alpha, t).unwrap(),
        oracle,
        1e-6,
        "quadrature oracle",
    );
}
