//! Exact-rational power series for linear ordinary differential equations,
//! and extrapolation models fitted from a handful of reference values.
//!
//! An equation is given by polynomial coefficients `c_0(x), ..., c_r(x)`
//! (ascending derivative order) for
//!
//! ```text
//!     c_r(x) f^(r)(x) + ... + c_1(x) f'(x) + c_0(x) f(x) = 0.
//! ```
//!
//! Around an ordinary point `c` (one where `c_r(c) != 0`) every solution is
//! an analytic series `f(x) = sum_k a_k (x - c)^k`, and matching powers of
//! `x - c` turns the equation into a band recurrence that determines `a_{k+r}`
//! from finitely many earlier coefficients.  All of this is done in exact
//! rational arithmetic: the computed coefficients satisfy the recurrence
//! identically, with no rounding at any step.  Floating point enters only in
//! diagnostics (the last-term indicator and the radius estimate) and when a
//! caller converts a result for display.
//!
//! The pieces fit together as follows.
//!
//! * [`series_solution`] builds the coefficient vector from `r` initial
//!   coefficients `a_0, ..., a_{r-1}`.
//! * [`evaluate_series`] sums the truncated series at an exact rational
//!   point by Horner's rule, rounds the exact value to a dyadic rational
//!   with `precision_bits` fractional bits, and reports the magnitude of
//!   the last retained terms as a truncation indicator.
//! * [`fit_extrapolation`] builds `r` series with canonical initial
//!   conditions at caller-chosen centers, then solves for the weights `t`
//!   that reproduce `r` reference values; the fitted combination
//!   `sum_i t_i f_i` extrapolates the solution beyond the data that defined
//!   it.
//! * [`radius_estimate`] turns the tail of a coefficient vector into a
//!   root-test estimate of the convergence radius.
//!
//! # File formats
//!
//! Two JSON formats are understood.  Rational values may be written as
//! integers, `"p/q"` strings, or decimal strings (`"0.125"`,
//! `"1.5707963268"`); decimals are read exactly, never through a float.
//! Non-integer JSON numbers are rejected so that no value silently loses
//! digits.
//!
//! An equation file ([`parse_ode`]):
//!
//! ```text
//! { "rank": 2, "coeffs": [[1], [0], [1]], "var": "x" }
//! ```
//!
//! `coeffs` lists `rank + 1` polynomials, constant term first; the example
//! is `f'' + f = 0`.  `var` only names the variable in display output.
//!
//! A job file ([`parse_job`]) bundles everything needed to fit and evaluate
//! an extrapolation model:
//!
//! ```text
//! {
//!   "centers": ["0", "1/10"],
//!   "n_terms": 400,
//!   "ref_points": ["0", "1.5707963268"],
//!   "ref_values": ["0", "1"],
//!   "precision_bits": 256,
//!   "eval_grid": { "start": "0", "stop": "3", "step": "1/10" }
//! }
//! ```

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Default cap on the exact-coefficient storage of one series, measured in
/// 64-bit words.  At this size a run is aborted long before it can exhaust
/// the machine.
pub const DEFAULT_MEMORY_BUDGET_WORDS: u64 = 100_000_000;

/// Hard ceiling for the snap precision used by [`fit_extrapolation`] when
/// it retries an ill-conditioned system at higher precision.
pub const MAX_PRECISION_BITS: u32 = 4096;

const MAX_GRID_POINTS: usize = 1_000_000;

/// A reference point is usable only while the series' truncation indicator
/// sits at least this many bits below the entry it produces; closer than
/// that, the entry carries essentially no converged digits.
const ENTRY_TRUST_LOG2: f64 = 8.0;

/// A linear ODE with polynomial coefficients, `sum_i c_i(x) f^(i)(x) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OdeSpec {
    rank: usize,
    coeffs: Vec<Vec<BigRational>>,
    var: String,
}

impl OdeSpec {
    /// Builds an equation of order `rank` from `rank + 1` coefficient
    /// polynomials, constant term first within each polynomial.
    ///
    /// The leading polynomial `c_rank` must not be identically zero;
    /// otherwise the stated order would be a lie and every expansion center
    /// would be singular.
    pub fn new(rank: usize, coeffs: Vec<Vec<BigRational>>) -> Result<Self> {
        if rank < 1 {
            return Err(Error::InvalidArgument("ODE rank must be at least 1".into()));
        }
        if coeffs.len() != rank + 1 {
            return Err(Error::InvalidArgument(format!(
                "an order-{rank} equation needs {} coefficient polynomials, got {}",
                rank + 1,
                coeffs.len()
            )));
        }
        if coeffs[rank].iter().all(Zero::is_zero) {
            return Err(Error::InvalidArgument(format!(
                "the leading coefficient c_{rank} is identically zero"
            )));
        }
        Ok(Self {
            rank,
            coeffs,
            var: "x".into(),
        })
    }

    /// The derivative order `r`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The coefficient polynomial of `f^(i)`, constant term first.
    pub fn coefficient(&self, i: usize) -> &[BigRational] {
        &self.coeffs[i]
    }

    /// The display name of the independent variable.
    pub fn var(&self) -> &str {
        &self.var
    }

    /// Largest polynomial degree among the coefficients.
    fn max_degree(&self) -> usize {
        self.coeffs
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// All coefficient polynomials rewritten in powers of `y = x - center`.
    fn shifted(&self, center: &BigRational) -> Vec<Vec<BigRational>> {
        self.coeffs.iter().map(|p| shift_poly(p, center)).collect()
    }
}

/// A truncated power-series solution `sum_k a_k (x - center)^k` with exact
/// rational coefficients, tied to the equation it solves.
#[derive(Clone, Debug)]
pub struct SeriesSolution {
    ode: OdeSpec,
    center: BigRational,
    coeffs: Vec<BigRational>,
}

impl SeriesSolution {
    /// The equation this series solves.
    pub fn ode(&self) -> &OdeSpec {
        &self.ode
    }

    /// The expansion center.
    pub fn center(&self) -> &BigRational {
        &self.center
    }

    /// The coefficients `a_0, ..., a_{N-1}` (N = the `n_terms` requested).
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Taylor coefficients of `sum_i c_i(x) f^(i)(x)` for every order the
    /// truncated series determines completely.
    ///
    /// This recomputes the residual by generic polynomial algebra
    /// (differentiate the series, multiply by each shifted coefficient,
    /// add up), independently of the index bookkeeping inside the solver;
    /// for a correct solution every returned entry is exactly zero.
    pub fn residual_coefficients(&self) -> Vec<BigRational> {
        let r = self.ode.rank;
        let n = self.coeffs.len();
        let shifted = self.ode.shifted(&self.center);
        let complete = n - r;
        let mut acc = vec![BigRational::zero(); complete];
        for (i, poly) in shifted.iter().enumerate() {
            for (d, c) in poly.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for (order, slot) in acc.iter_mut().enumerate() {
                    if order < d {
                        continue;
                    }
                    let k = order - d + i;
                    if k >= n {
                        continue;
                    }
                    let ff = falling_factorial(k, i);
                    if ff.is_zero() {
                        continue;
                    }
                    *slot += c * &self.coeffs[k] * BigRational::from(ff);
                }
            }
        }
        acc
    }
}

/// One evaluated point of a series or extrapolation model.
///
/// `value` is the exact Horner sum rounded to a dyadic rational with the
/// requested number of fractional bits.  `last_term` is the magnitude of
/// the largest of the final few retained terms `|a_k (x - center)^k|`
/// (enough trailing terms to bridge any parity gaps the recurrence leaves
/// in the coefficients); a small value certifies that the truncated tail
/// was already negligible, a large one flags evaluation outside the
/// series' usable range.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// Dyadic rounding of the exact truncated-series value.
    pub value: BigRational,
    /// Magnitude of the last retained terms; 0 for a terminated series.
    pub last_term: f64,
}

impl Evaluation {
    /// The value as a double, saturating to signed infinity if it does not
    /// fit.
    pub fn value_f64(&self) -> f64 {
        rational_to_f64(&self.value)
    }
}

/// Builds the series solution with coefficients `a_0..a_{rank-1} = init`
/// around `center`, carrying `n_terms` coefficients in total, under the
/// default memory budget.
///
/// Fails with [`Error::SingularCenter`] if the leading coefficient vanishes
/// at `center`, and with [`Error::MemoryBudget`] if the exact coefficients
/// outgrow [`DEFAULT_MEMORY_BUDGET_WORDS`].
pub fn series_solution(
    ode: &OdeSpec,
    center: &BigRational,
    init: &[BigRational],
    n_terms: usize,
) -> Result<SeriesSolution> {
    series_solution_with_budget(ode, center, init, n_terms, DEFAULT_MEMORY_BUDGET_WORDS)
}

/// [`series_solution`] with an explicit storage budget in 64-bit words.
///
/// The budget is checked every 128 coefficients against the total size of
/// all numerators and denominators computed so far, so a runaway recurrence
/// stops in bounded time with an honest error instead of thrashing the
/// allocator.
pub fn series_solution_with_budget(
    ode: &OdeSpec,
    center: &BigRational,
    init: &[BigRational],
    n_terms: usize,
    budget_words: u64,
) -> Result<SeriesSolution> {
    let r = ode.rank;
    if init.len() != r {
        return Err(Error::InvalidArgument(format!(
            "an order-{r} equation needs {r} initial coefficients, got {}",
            init.len()
        )));
    }
    if n_terms < r {
        return Err(Error::InvalidArgument(format!(
            "n_terms must be at least the rank ({r}), got {n_terms}"
        )));
    }
    let shifted = ode.shifted(center);
    if shifted[r][0].is_zero() {
        return Err(Error::SingularCenter {
            center: center.to_string(),
        });
    }
    let mut a = init.to_vec();
    a.reserve(n_terms - r);
    for t in 0..(n_terms - r) {
        // Coefficient of y^t in the residual: the only appearance of the
        // unknown a_{t+r} comes from the constant term of the leading
        // polynomial, so everything else moves to the right-hand side.
        let mut s = BigRational::zero();
        for (i, poly) in shifted.iter().enumerate() {
            for (d, c) in poly.iter().enumerate() {
                if c.is_zero() || (i == r && d == 0) || d > t {
                    continue;
                }
                let k = t - d + i;
                let ff = falling_factorial(k, i);
                if ff.is_zero() {
                    continue;
                }
                s += c * &a[k] * BigRational::from(ff);
            }
        }
        let lead = &shifted[r][0] * BigRational::from(falling_factorial(t + r, r));
        a.push(-s / lead);
        if a.len() % 128 == 0 {
            let used = storage_words(&a);
            if used > budget_words {
                return Err(Error::MemoryBudget {
                    used_words: used,
                    budget_words,
                });
            }
        }
    }
    Ok(SeriesSolution {
        ode: ode.clone(),
        center: center.clone(),
        coeffs: a,
    })
}

/// The `rank` canonical initial-coefficient vectors: vector `i` has
/// `a_j = delta_{ij} / j!`, so the corresponding solutions satisfy
/// `d^j f_i / dx^j (center) = delta_{ij}` and their Wronskian matrix at the
/// center is exactly the identity.
pub fn canonical_basis_inits(rank: usize) -> Vec<Vec<BigRational>> {
    (0..rank)
        .map(|i| {
            (0..rank)
                .map(|j| {
                    if i == j {
                        BigRational::new(BigInt::one(), factorial(i))
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Sums the truncated series at the exact point `x` and rounds to
/// `precision_bits` fractional bits.
///
/// The Horner sum itself is exact; the only rounding is the final dyadic
/// snap, so `value` is within `2^-(precision_bits+1)` of the true truncated
/// sum.  Truncation error is what `last_term` measures.
pub fn evaluate_series(sol: &SeriesSolution, x: &BigRational, precision_bits: u32) -> Evaluation {
    Evaluation {
        value: snap_to_bits(&exact_series_value(sol, x), precision_bits),
        last_term: exp2_saturating(last_term_log2(sol, x)),
    }
}

/// Root-test estimate of the convergence radius: `1 / sup |a_k|^(1/k)`
/// over the last quarter of the coefficients.
///
/// Needs at least 100 coefficients (asserted) so the tail dominates the
/// transient of the recurrence.  Returns infinity when the tail is
/// identically zero, i.e. the series terminated.
pub fn radius_estimate(sol: &SeriesSolution) -> f64 {
    let n = sol.coeffs.len();
    assert!(
        n >= 100,
        "radius estimation needs at least 100 coefficients, got {n}"
    );
    let mut sup = f64::NEG_INFINITY;
    for k in (n - n / 4)..n {
        let a = &sol.coeffs[k];
        if a.is_zero() {
            continue;
        }
        sup = sup.max(log2_abs(a) / k as f64);
    }
    if sup == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (-sup).exp2()
    }
}

/// A linear combination `sum_i t_i f_i` of series solutions that reproduces
/// the reference values it was fitted to and extrapolates beyond them.
#[derive(Clone, Debug)]
pub struct ExtrapolationModel {
    basis: Vec<SeriesSolution>,
    weights: Vec<BigRational>,
    ref_points: Vec<BigRational>,
    ref_values: Vec<BigRational>,
    residual: f64,
    condition: f64,
    precision_bits: u32,
}

impl ExtrapolationModel {
    /// The basis series, one per center, in the order the centers were
    /// given.
    pub fn basis(&self) -> &[SeriesSolution] {
        &self.basis
    }

    /// The fitted weights `t`, matching `basis` by index.
    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    /// The points the fit interpolates.
    pub fn ref_points(&self) -> &[BigRational] {
        &self.ref_points
    }

    /// The values the fit interpolates.
    pub fn ref_values(&self) -> &[BigRational] {
        &self.ref_values
    }

    /// Largest interpolation defect `|sum_i t_i f_i(p_j) - b_j|` measured
    /// against the unsnapped basis values.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Growth factor `max |t_i f_i(p_j)| / max |b_j|` of the solve; large
    /// values mean the weights rest on heavy cancellation.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// The snap precision the system was solved at (it may exceed the
    /// requested precision if the fit had to retry).
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Evaluates the combination at `x`, rounding like [`evaluate_series`]
    /// and reporting the largest weight-scaled last-term indicator among
    /// the basis series.
    pub fn evaluate(&self, x: &BigRational) -> Evaluation {
        let mut v = BigRational::zero();
        let mut ind = f64::NEG_INFINITY;
        for (t, f) in self.weights.iter().zip(&self.basis) {
            if !t.is_zero() {
                v += t * exact_series_value(f, x);
                ind = ind.max(log2_abs(t) + last_term_log2(f, x));
            }
        }
        Evaluation {
            value: snap_to_bits(&v, self.precision_bits),
            last_term: exp2_saturating(ind),
        }
    }
}

/// Fits an extrapolation model: one series per center with canonical
/// initial conditions, weights chosen so the combination passes through
/// the `rank` reference values.
///
/// The `rank x rank` system `F t = b`, `F[j][i] = f_i(p_j)`, is solved by
/// exact rational Gaussian elimination with partial pivoting.  Before the
/// solve each matrix entry is snapped to `precision_bits` fractional bits;
/// entries whose exact representation is already at most that many bits
/// are kept verbatim, so small exact systems (terminating solutions in
/// particular) are solved with no rounding at all.  If the interpolation
/// residual, measured against the unsnapped values, exceeds
/// `2^-(precision_bits/2)`, the snap precision is doubled and the solve
/// retried up to [`MAX_PRECISION_BITS`]; exhausting the retries raises
/// [`Error::SingularSystem`].
///
/// Reference points must lie inside every series' usable range: a point
/// whose last-term indicator is not negligible against the entry magnitude
/// raises [`Error::OutsideConvergenceRange`], because the matrix entry
/// itself would be untrustworthy.
pub fn fit_extrapolation(
    ode: &OdeSpec,
    centers: &[BigRational],
    n_terms: usize,
    ref_points: &[BigRational],
    ref_values: &[BigRational],
    precision_bits: u32,
) -> Result<ExtrapolationModel> {
    let r = ode.rank;
    if centers.len() != r || ref_points.len() != r || ref_values.len() != r {
        return Err(Error::InvalidArgument(format!(
            "an order-{r} fit needs {r} centers, {r} reference points and {r} \
             reference values, got {}, {} and {}",
            centers.len(),
            ref_points.len(),
            ref_values.len()
        )));
    }
    if !(8..=MAX_PRECISION_BITS).contains(&precision_bits) {
        return Err(Error::InvalidArgument(format!(
            "precision_bits must be in [8, {MAX_PRECISION_BITS}], got {precision_bits}"
        )));
    }
    let inits = canonical_basis_inits(r);
    let basis = centers
        .iter()
        .zip(&inits)
        .map(|(c, e)| series_solution(ode, c, e, n_terms))
        .collect::<Result<Vec<_>>>()?;

    // Exact matrix entries, screened against evaluating any series where
    // its own truncation no longer vouches for the digits.
    let mut exact = vec![vec![BigRational::zero(); r]; r];
    for (j, p) in ref_points.iter().enumerate() {
        for (i, f) in basis.iter().enumerate() {
            let entry = exact_series_value(f, p);
            let ind = last_term_log2(f, p);
            if ind > log2_abs(&entry).max(0.0) - ENTRY_TRUST_LOG2 {
                return Err(Error::OutsideConvergenceRange {
                    point: p.to_string(),
                    center: f.center.to_string(),
                    indicator: exp2_saturating(ind),
                });
            }
            exact[j][i] = entry;
        }
    }

    let target = -f64::from(precision_bits) / 2.0;
    let mut bits = precision_bits;
    let mut detail;
    loop {
        let snapped: Vec<Vec<BigRational>> = exact
            .iter()
            .map(|row| row.iter().map(|e| snap_entry(e, bits)).collect())
            .collect();
        match solve_exact(&snapped, ref_values) {
            Some(weights) => {
                let mut residual_log2 = f64::NEG_INFINITY;
                let mut growth_log2 = f64::NEG_INFINITY;
                let mut rhs_log2 = -f64::from(bits);
                for (j, b) in ref_values.iter().enumerate() {
                    let mut fit = BigRational::zero();
                    for (i, t) in weights.iter().enumerate() {
                        fit += t * &exact[j][i];
                        growth_log2 = growth_log2.max(log2_abs(t) + log2_abs(&exact[j][i]));
                    }
                    residual_log2 = residual_log2.max(log2_abs(&(fit - b)));
                    rhs_log2 = rhs_log2.max(log2_abs(b));
                }
                let condition = exp2_saturating(growth_log2 - rhs_log2);
                if residual_log2 <= target {
                    return Ok(ExtrapolationModel {
                        basis,
                        weights,
                        ref_points: ref_points.to_vec(),
                        ref_values: ref_values.to_vec(),
                        residual: exp2_saturating(residual_log2),
                        condition,
                        precision_bits: bits,
                    });
                }
                detail = format!(
                    "interpolation residual 2^{residual_log2:.1} at {bits} snap bits \
                     (growth factor {condition:.3e})"
                );
            }
            None => {
                detail = format!("matrix is exactly singular at {bits} snap bits");
            }
        }
        if bits >= MAX_PRECISION_BITS {
            return Err(Error::SingularSystem { detail });
        }
        bits = (bits * 2).min(MAX_PRECISION_BITS);
    }
}

/// Parses an equation file; see the module docs for the format.
pub fn parse_ode(text: &str) -> Result<OdeSpec> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("equation file is not valid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("equation file must be a JSON object".into()))?;
    let rank = obj
        .get("rank")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse("equation file needs a positive integer `rank`".into()))?;
    let coeffs = obj
        .get("coeffs")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| Error::Parse("equation file needs a `coeffs` array of arrays".into()))?
        .iter()
        .map(|poly| {
            poly.as_array()
                .ok_or_else(|| {
                    Error::Parse("each entry of `coeffs` must be an array of rationals".into())
                })?
                .iter()
                .map(rational_from_json)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ode = OdeSpec::new(rank as usize, coeffs)?;
    if let Some(var) = obj.get("var").and_then(serde_json::Value::as_str) {
        ode.var = var.to_string();
    }
    Ok(ode)
}

/// An arithmetic evaluation grid `start, start + step, ...` capped at
/// `stop` (inclusive), held exactly.
#[derive(Clone, Debug)]
pub struct EvalGrid {
    pub start: BigRational,
    pub stop: BigRational,
    pub step: BigRational,
}

impl EvalGrid {
    /// Expands the grid; every point is an exact rational, so `stop` is hit
    /// exactly whenever `stop - start` is a multiple of `step`.
    pub fn points(&self) -> Result<Vec<BigRational>> {
        if self.step <= BigRational::zero() {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        if self.stop < self.start {
            return Err(Error::InvalidArgument(format!(
                "grid stop {} lies before start {}",
                self.stop, self.start
            )));
        }
        let mut out = Vec::new();
        let mut x = self.start.clone();
        while x <= self.stop {
            if out.len() >= MAX_GRID_POINTS {
                return Err(Error::InvalidArgument(format!(
                    "grid has more than {MAX_GRID_POINTS} points"
                )));
            }
            out.push(x.clone());
            x += &self.step;
        }
        Ok(out)
    }
}

/// A fit-and-evaluate job; see the module docs for the file format.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub centers: Vec<BigRational>,
    pub n_terms: usize,
    pub ref_points: Vec<BigRational>,
    pub ref_values: Vec<BigRational>,
    pub precision_bits: u32,
    pub eval_grid: EvalGrid,
}

/// Parses a job file; see the module docs for the format.
pub fn parse_job(text: &str) -> Result<JobSpec> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("job file is not valid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("job file must be a JSON object".into()))?;
    let rationals = |field: &str| -> Result<Vec<BigRational>> {
        obj.get(field)
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| Error::Parse(format!("job file needs a `{field}` array")))?
            .iter()
            .map(rational_from_json)
            .collect()
    };
    let integer = |field: &str| -> Result<u64> {
        obj.get(field)
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse(format!("job file needs a positive integer `{field}`")))
    };
    let grid = obj
        .get("eval_grid")
        .and_then(serde_json::Value::as_object)
        .ok_or_else(|| {
            Error::Parse("job file needs an `eval_grid` object with start/stop/step".into())
        })?;
    let grid_field = |field: &str| -> Result<BigRational> {
        rational_from_json(
            grid.get(field)
                .ok_or_else(|| Error::Parse(format!("eval_grid needs a `{field}` field")))?,
        )
    };
    Ok(JobSpec {
        centers: rationals("centers")?,
        n_terms: integer("n_terms")? as usize,
        ref_points: rationals("ref_points")?,
        ref_values: rationals("ref_values")?,
        precision_bits: u32::try_from(integer("precision_bits")?)
            .map_err(|_| Error::Parse("precision_bits does not fit in 32 bits".into()))?,
        eval_grid: EvalGrid {
            start: grid_field("start")?,
            stop: grid_field("stop")?,
            step: grid_field("step")?,
        },
    })
}

/// Parses `"p/q"`, integer, and decimal strings (optionally with an
/// exponent, `"3.25e-2"`) into exact rationals.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let joined: String = int_part.chars().chain(frac_part.chars()).collect();
    if joined.is_empty() || !joined.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let n: BigInt = joined.parse().map_err(|_| bad())?;
    let shift = exp - i32::try_from(frac_part.len()).map_err(|_| bad())?;
    let ten = BigInt::from(10);
    let value = if shift >= 0 {
        BigRational::from(n * ten.pow(shift as u32))
    } else {
        BigRational::new(n, ten.pow(shift.unsigned_abs()))
    };
    Ok(if sign < 0 { -value } else { value })
}

fn rational_from_json(v: &serde_json::Value) -> Result<BigRational> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigRational::from(BigInt::from(i)))
            } else if let Some(u) = n.as_u64() {
                Ok(BigRational::from(BigInt::from(u)))
            } else {
                Err(Error::Parse(format!(
                    "write non-integer numbers as strings like \"1/2\" or \"0.5\" so they \
                     stay exact, got {n}"
                )))
            }
        }
        serde_json::Value::String(s) => parse_rational(s),
        other => Err(Error::Parse(format!(
            "expected a rational (integer or string), got {other}"
        ))),
    }
}

/// Exact Horner sum of the truncated series at `x`.
fn exact_series_value(sol: &SeriesSolution, x: &BigRational) -> BigRational {
    let y = x - &sol.center;
    let mut v = BigRational::zero();
    for a in sol.coeffs.iter().rev() {
        v = v * &y + a;
    }
    v
}

/// log2 of the largest of the final retained terms `|a_k (x - center)^k|`,
/// scanning one full recurrence band so parity gaps (every other
/// coefficient zero, say) cannot fake a terminated tail.
fn last_term_log2(sol: &SeriesSolution, x: &BigRational) -> f64 {
    let y = x - &sol.center;
    if y.is_zero() {
        return f64::NEG_INFINITY;
    }
    let ly = log2_abs(&y);
    let band = sol.ode.max_degree() + sol.ode.rank + 1;
    let n = sol.coeffs.len();
    let mut best = f64::NEG_INFINITY;
    for k in n.saturating_sub(band)..n {
        let a = &sol.coeffs[k];
        if !a.is_zero() {
            best = best.max(log2_abs(a) + k as f64 * ly);
        }
    }
    best
}

/// Gaussian elimination with partial pivoting in exact rational
/// arithmetic; `None` when the matrix is exactly singular.
fn solve_exact(matrix: &[Vec<BigRational>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let r = rhs.len();
    let mut aug: Vec<Vec<BigRational>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut v = row.clone();
            v.push(b.clone());
            v
        })
        .collect();
    for col in 0..r {
        let pivot = (col..r).max_by(|&p, &q| aug[p][col].abs().cmp(&aug[q][col].abs()))?;
        if aug[pivot][col].is_zero() {
            return None;
        }
        aug.swap(col, pivot);
        let pivot_row = aug[col].clone();
        for row in aug.iter_mut().skip(col + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = &row[col] / &pivot_row[col];
            for (cell, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *cell -= &factor * p;
            }
        }
    }
    let mut t = vec![BigRational::zero(); r];
    for col in (0..r).rev() {
        let mut v = aug[col][r].clone();
        for (j, tj) in t.iter().enumerate().skip(col + 1) {
            v -= &aug[col][j] * tj;
        }
        t[col] = v / &aug[col][col];
    }
    Some(t)
}

/// Rewrites a polynomial in powers of `y = x - c` by the binomial theorem.
fn shift_poly(poly: &[BigRational], c: &BigRational) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); poly.len()];
    for (e, pe) in poly.iter().enumerate() {
        if pe.is_zero() {
            continue;
        }
        let mut cpow = BigRational::one();
        for d in (0..=e).rev() {
            out[d] += pe * BigRational::from(binomial(e, d)) * &cpow;
            cpow *= c;
        }
    }
    out
}

/// Rounds to the nearest multiple of `2^-bits` (ties away from zero).
fn snap_to_bits(q: &BigRational, bits: u32) -> BigRational {
    if q.is_zero() {
        return BigRational::zero();
    }
    let scale = BigInt::one() << bits as usize;
    let scaled = q * BigRational::from(scale.clone());
    BigRational::new(scaled.round().to_integer(), scale)
}

/// [`snap_to_bits`], except entries already representable within the
/// precision budget are kept exact.
fn snap_entry(q: &BigRational, bits: u32) -> BigRational {
    if q.numer().bits() + q.denom().bits() <= u64::from(bits) {
        q.clone()
    } else {
        snap_to_bits(q, bits)
    }
}

fn storage_words(coeffs: &[BigRational]) -> u64 {
    coeffs
        .iter()
        .map(|a| (a.numer().bits() + a.denom().bits()) / 64 + 4)
        .sum()
}

fn factorial(n: usize) -> BigInt {
    let mut v = BigInt::one();
    for k in 2..=n {
        v *= BigInt::from(k);
    }
    v
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut v = BigInt::one();
    for j in 0..k.min(n - k) {
        v = v * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    v
}

/// `k (k-1) ... (k-i+1)`; zero when `i > k`.
fn falling_factorial(k: usize, i: usize) -> BigInt {
    if i > k {
        return BigInt::zero();
    }
    let mut v = BigInt::one();
    for j in 0..i {
        v *= BigInt::from(k - j);
    }
    v
}

/// log2 of `|q|`, exact to double precision for arbitrarily large
/// rationals; negative infinity for zero.
fn log2_abs(q: &BigRational) -> f64 {
    if q.is_zero() {
        return f64::NEG_INFINITY;
    }
    log2_magnitude(q.numer()) - log2_magnitude(q.denom())
}

fn log2_magnitude(n: &BigInt) -> f64 {
    let m = n.magnitude();
    let bits = m.bits();
    if bits <= 53 {
        m.to_f64().expect("small magnitude fits f64").log2()
    } else {
        let top = (m >> (bits - 53)).to_f64().expect("53-bit value fits f64");
        top.log2() + (bits - 53) as f64
    }
}

fn exp2_saturating(l: f64) -> f64 {
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        l.exp2()
    }
}

/// Nearest double to an exact rational, saturating to signed infinity when
/// the magnitude exceeds the double range.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let sign = if q.is_negative() { -1.0 } else { 1.0 };
        sign * exp2_saturating(log2_abs(q))
    })
}
