//! Solver library for time-fractional partial integro-differential equations
//!
//! This crate implements a non-uniform IMEX-L1 mixed finite element method for
//! problems of the form
//!
//! ```text
//! ∂^α_t u + Lu − λ Iu = f   in Ω × (0,T],
//! u = u_D                   on ∂Ω × (0,T],
//! u(·,0) = u₀               in Ω,
//! ```
//!
//! where `∂^α_t` is a Caputo derivative of order `α ∈ (0,1)`,
//! `Lu = −∇·(A∇u) + b·∇u + cu` is a second-order elliptic operator with
//! variable (space- and time-dependent) coefficients and
//! `Iu(x,t) = ∫_Ω u(y,t) g(x,y) dy` is a Fredholm integral coupling.
//!
//! The time discretisation is the L1 formula on a graded mesh
//! `t_n = (n/N)^γ T`; the memory-free elliptic part is treated implicitly
//! while the integral term and the source are extrapolated explicitly, so a
//! sparse solve suffices at every step. Space is discretised with
//! Raviart-Thomas mixed elements (`RT0/P0dc` or `RT1/P1dc`) for the flux
//! `σ = A∇u` and the scalar unknown `u`.
//!
//! Besides the solver the crate ships executable verifiers for the discrete
//! machinery the scheme's analysis relies on:
//!
//! * [`fractime`] — graded grids, L1 kernels `K^{n,j}`, complementary kernels
//!   `P^{n,j}`, the extrapolation operator and the special functions
//!   (gamma, Mittag-Leffler) needed by the bounds;
//! * [`gronwall`] — the discrete fractional Gronwall inequality, the
//!   fractional product inequality for weighted norms, and the stability
//!   bounds evaluated as runtime monitors on solver output;
//! * [`mesh2d`] / [`mixedfem`] — structured triangulations, mixed spaces,
//!   projections and assembly;
//! * [`problems`] — the catalog of benchmark problems (manufactured
//!   solutions, an integro-differential example, and two option-pricing
//!   models: a fractional Black-Scholes and a fractional Merton model);
//! * [`solver`] — the IMEX-L1 time-stepping loop;
//! * [`harness`] — error norms, convergence rates, reference solutions and
//!   CSV table generation.

pub mod fractime;
pub mod gronwall;
pub mod harness;
pub mod linalg;
pub mod mesh2d;
pub mod mixedfem;
pub mod problems;
pub mod solver;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (e.g. `α ∉ (0,1)`).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Array/vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// An argument is outside the documented reliable range of a routine.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// A theorem hypothesis (step condition, row-sum bound, ...) is violated,
    /// so the requested bound is not claimed.
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    /// Numerical failure (singular matrix, failed factorisation, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Unknown catalog entry or malformed problem description.
    #[error("catalog error: {0}")]
    Catalog(String),
    /// Geometric query failure (point outside mesh, degenerate triangle, ...).
    #[error("geometry error: {0}")]
    Geometry(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
