//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or matrix argument violates its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix was built with a shape that does not match its data.
    #[error("dimension mismatch: {rows}x{cols} shape needs {expected} entries, got {got}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },

    /// An operation that needs a symmetric matrix was given an asymmetric one.
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    /// A covariance matrix has a non-positive eigenvalue.
    #[error("matrix is not positive definite (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { eigenvalue: f64 },

    /// An iteration failed to reach its tolerance.
    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    /// The quadrature refinement hit its grid cap before the requested
    /// tolerance; `value` is the best estimate and `achieved` the last
    /// observed refinement change.
    #[error(
        "quadrature did not reach tolerance {requested:e} (best value {value:.17e}, \
         achieved {achieved:e})"
    )]
    QuadratureNotConverged {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    /// A power-series expansion was requested at a root of the leading
    /// coefficient.
    #[error("expansion center {center} is a singular point: leading coefficient vanishes")]
    SingularCenter { center: String },

    /// The extrapolation fit produced a singular or hopelessly
    /// ill-conditioned linear system.
    #[error("extrapolation system is singular or numerically rank-deficient: {detail}")]
    SingularSystem { detail: String },

    /// A reference point lies outside the usable range of a series.
    #[error(
        "reference point {point} is outside the convergence range of the series at \
         center {center} (last-term indicator {indicator:e})"
    )]
    OutsideConvergenceRange {
        point: String,
        center: String,
        indicator: f64,
    },

    /// Exact series construction exceeded its memory budget.
    #[error(
        "series construction exceeded the memory budget ({used_words} of {budget_words} words)"
    )]
    MemoryBudget { used_words: u64, budget_words: u64 },

    /// A file or inline description could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}
