//! Tail probabilities for the largest eigenvalue of real Wishart matrices,
//! approximated by the expected Euler characteristic of the excursion set of
//! the associated Gaussian-matrix singular-value problem.
//!
//! Let `V` be an `m x n` (`n >= m >= 2`) matrix with independent rows, row `i`
//! drawn from `N(0, I_n / s_i)`, let `M` be a fixed mean matrix, and let
//! `W = (V + M)(V + M)^T`. The largest eigenvalue of `W` is the squared
//! largest singular value of `A = V + M`, and
//!
//! ```text
//! Pr(sigma_1(A) >= x)  ~=  E[chi_x]
//! ```
//!
//! where `chi_x` is the Euler characteristic of the part of the unit-sphere
//! product manifold swept out by singular vectors whose singular value
//! exceeds `x`. The expectation equals the alternating sum
//! `sum_i (-1)^(i-1) Pr(sigma_i >= x)` exactly, so it upper-bounds the tail
//! probability, is asymptotically exact as `x` grows, and is computable
//! either in closed form (central case, scalar covariance) or by a
//! low-dimensional deterministic quadrature (non-central `2 x 2` case).
//!
//! Modules:
//!
//! * [`central`]: closed-form evaluation for `M = 0` and scale matrix
//!   `s * I`, plus its leading tail asymptote and the error asymptote of the
//!   approximation itself.
//! * [`nc2`]: deterministic 4-D quadrature for the non-central `2 x 2` case
//!   with diagonal scales and lower-triangular mean.
//! * [`mc`]: reproducible Monte Carlo estimates of the per-eigenvalue tails,
//!   of the alternating sum, and of the ratio `Pr(lambda_2 >= x) /
//!   Pr(lambda_1 >= x)` that controls the approximation error.
//! * [`ode`]: exact power-series solutions of linear ODEs with polynomial
//!   coefficients, and series extrapolation fitted to reference values; the
//!   building block for holonomic continuation of the hypergeometric
//!   functions underlying the general non-central case.
//! * [`linalg`]: the small dense kernels (symmetric eigendecomposition, LQ,
//!   singular values) and the canonical reduction of general `(Sigma, M)`
//!   parameters to diagonal-scale lower-triangular form.
//! * [`special`]: log-gamma, regularized incomplete gamma, Gaussian tail
//!   moments, terminating confluent series, chi-square tails, and the
//!   normalization constants of the closed form.
//!
//! All randomized routines are counter-based and deterministic: results
//! depend only on `(seed, n_samples, chunk_size)`, never on thread count.

pub mod central;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod nc2;
pub mod ode;
pub mod special;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
