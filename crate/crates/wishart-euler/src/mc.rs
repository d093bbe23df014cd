//! Reproducible Monte Carlo estimators for the eigenvalue tails, the
//! alternating-sum quantity, and the second-to-first tail ratio.
//!
//! Random numbers come from counter-based SplitMix64 streams: chunk `k` of
//! a run draws from a stream derived from `(seed, k)` alone, normals are
//! produced by inverse-CDF (no rejection state), and aggregation over
//! chunks is sequential in chunk order. Together these make every
//! estimate bit-identical for a given `(seed, n_samples, chunk_size)`, no
//! matter how many threads execute the chunks.

use rayon::prelude::*;

use crate::linalg::{singular_values, Matrix, WishartParams};
use crate::special::inverse_normal_cdf;
use crate::{Error, Result};

/// Counter-based random stream: SplitMix64 seeded from `(seed, chunk)`.
#[derive(Clone, Debug)]
pub struct McStream {
    state: u64,
}

impl McStream {
    /// Stream for chunk `chunk` of the run identified by `seed`.
    pub fn new(seed: u64, chunk: u64) -> Self {
        let mut stream = Self {
            state: seed ^ chunk.wrapping_mul(0xa24b_aed4_963e_e407),
        };
        // Two warm-up rounds decorrelate neighboring (seed, chunk) pairs.
        stream.next_u64();
        stream.next_u64();
        stream
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inverse CDF.
    pub fn next_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }
}

/// Sampling configuration. `chunk_size` sets the parallel granularity and
/// is part of the reproducibility key.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            seed: 0,
            chunk_size: 16_384,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples < 1_000 {
            return Err(Error::InvalidArgument(format!(
                "n_samples must be at least 1000, got {}",
                self.n_samples
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidArgument(
                "chunk_size must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Whether thresholds are on the singular-value scale (`sigma_i >= x`,
/// the tables' convention) or the eigenvalue scale (`lambda_i >= x`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdScale {
    #[default]
    SingularValue,
    Eigenvalue,
}

/// One Monte Carlo estimate with its standard error and provenance.
#[derive(Clone, Copy, Debug)]
pub struct TailEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Ratio-estimate health: `FewTailSamples` marks numerator counts too low
/// for the delta-method error to be trustworthy; `EmptyDenominator` marks
/// an undefined ratio (reported as NaN).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioFlag {
    Ok,
    FewTailSamples,
    EmptyDenominator,
}

/// Estimated `Pr(lambda_2 >= x) / Pr(lambda_1 >= x)` at one threshold.
#[derive(Clone, Copy, Debug)]
pub struct RatioEstimate {
    pub x: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub numer_count: u64,
    pub denom_count: u64,
    pub flag: RatioFlag,
}

/// Draws one matrix `D V + M` with `D = diag(1/sqrt(s_i))` and `V`
/// standard normal, consuming `m * n` normals in row-major order.
pub fn sample_matrix(p: &WishartParams, stream: &mut McStream) -> Matrix {
    let (m, n) = (p.m(), p.n());
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        let sd = 1.0 / p.scales()[i].sqrt();
        for j in 0..n {
            data.push(sd * stream.next_normal() + p.mean().get(i, j));
        }
    }
    Matrix::new(m, n, data).expect("sampled entries are finite")
}

fn validate_grid(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".to_string()));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(
            "thresholds must be finite and nonnegative".to_string(),
        ));
    }
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "thresholds must be sorted ascending".to_string(),
        ));
    }
    Ok(())
}

/// Sorted singular values of one draw, written into `out` (descending).
/// `row0` is caller-provided scratch of length `p.n()`.
#[allow(clippy::needless_range_loop)]
fn sample_singular_values(
    p: &WishartParams,
    stream: &mut McStream,
    out: &mut Vec<f64>,
    row0: &mut [f64],
) {
    let (m, n) = (p.m(), p.n());
    out.clear();
    if m == 2 {
        // Closed form on the Gram matrix of the 2 x n sample.
        let (mut w11, mut w12, mut w22) = (0.0, 0.0, 0.0);
        let sd0 = 1.0 / p.scales()[0].sqrt();
        let sd1 = 1.0 / p.scales()[1].sqrt();
        for j in 0..n {
            row0[j] = sd0 * stream.next_normal() + p.mean().get(0, j);
        }
        for j in 0..n {
            let b = sd1 * stream.next_normal() + p.mean().get(1, j);
            let a = row0[j];
            w11 += a * a;
            w12 += a * b;
            w22 += b * b;
        }
        let trace = w11 + w22;
        let disc = (w11 - w22).hypot(2.0 * w12);
        out.push((((trace + disc) / 2.0).max(0.0)).sqrt());
        out.push((((trace - disc) / 2.0).max(0.0)).sqrt());
        return;
    }
    let a = sample_matrix(p, stream);
    out.extend(singular_values(&a).expect("sample shape is valid"));
}

/// Threshold on the configured scale: the event `lambda_i >= x^2` on the
/// sigma scale, `lambda_i >= x` on the eigenvalue scale, tested on
/// sigma_i = sqrt(lambda_i).
#[inline]
fn exceeds(sigma: f64, x: f64, scale: ThresholdScale) -> bool {
    match scale {
        ThresholdScale::SingularValue => sigma >= x,
        ThresholdScale::Eigenvalue => sigma * sigma >= x,
    }
}

/// Splits `n_samples` into chunk ranges, maps them in parallel, and folds
/// the per-chunk results in fixed chunk order.
fn chunked_counts<T, F>(cfg: &McConfig, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let n_chunks = cfg.n_samples.div_ceil(cfg.chunk_size);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * cfg.chunk_size;
            let len = cfg.chunk_size.min(cfg.n_samples - start);
            per_chunk(chunk, len)
        })
        .collect()
}

/// Per-index tail estimates `Pr(lambda_i(W) >= threshold)` for every
/// threshold in `xs` (ascending) and every index `i = 1..=m`.
///
/// Returned as `result[xi][i]`; each entry carries the binomial standard
/// error `sqrt(v(1-v)/n)`.
pub fn estimate_eigen_tails(
    p: &WishartParams,
    xs: &[f64],
    scale: ThresholdScale,
    cfg: &McConfig,
) -> Result<Vec<Vec<TailEstimate>>> {
    cfg.validate()?;
    validate_grid(xs)?;
    let counts = eigen_tail_counts(p, xs, scale, cfg);
    let n = cfg.n_samples as f64;
    Ok(counts
        .chunks(p.m())
        .map(|per_index| {
            per_index
                .iter()
                .map(|&c| {
                    let v = c as f64 / n;
                    TailEstimate {
                        value: v,
                        stderr: (v * (1.0 - v) / n).sqrt(),
                        n_samples: cfg.n_samples,
                        seed: cfg.seed,
                    }
                })
                .collect()
        })
        .collect())
}

/// Raw exceedance counts, flattened as `xs.len() * m` in x-major order.
fn eigen_tail_counts(
    p: &WishartParams,
    xs: &[f64],
    scale: ThresholdScale,
    cfg: &McConfig,
) -> Vec<u64> {
    let m = p.m();
    let per_chunk = chunked_counts(cfg, |chunk, len| {
        let mut stream = McStream::new(cfg.seed, chunk);
        let mut counts = vec![0u64; xs.len() * m];
        let mut sv = Vec::with_capacity(m);
        let mut scratch = vec![0.0; p.n()];
        for _ in 0..len {
            sample_singular_values(p, &mut stream, &mut sv, &mut scratch);
            for (xi, &x) in xs.iter().enumerate() {
                for (i, &sigma) in sv.iter().enumerate() {
                    if exceeds(sigma, x, scale) {
                        counts[xi * m + i] += 1;
                    }
                }
            }
        }
        counts
    });
    let mut total = vec![0u64; xs.len() * m];
    for counts in per_chunk {
        for (t, c) in total.iter_mut().zip(counts) {
            *t += c;
        }
    }
    total
}

/// Monte Carlo estimate of the alternating sum
/// `sum_i (-1)^(i-1) Pr(lambda_i >= threshold)`, one estimate per
/// threshold.
///
/// The sum is evaluated per sample (values in `-1..=1` for any `m`), so
/// the reported standard error reflects the cancellation between indices
/// rather than treating them as independent.
pub fn estimate_expected_euler(
    p: &WishartParams,
    xs: &[f64],
    scale: ThresholdScale,
    cfg: &McConfig,
) -> Result<Vec<TailEstimate>> {
    cfg.validate()?;
    validate_grid(xs)?;
    let per_chunk = chunked_counts(cfg, |chunk, len| {
        let mut stream = McStream::new(cfg.seed, chunk);
        let mut sums = vec![0i64; xs.len()];
        let mut sq_sums = vec![0u64; xs.len()];
        let mut sv = Vec::with_capacity(p.m());
        let mut scratch = vec![0.0; p.n()];
        for _ in 0..len {
            sample_singular_values(p, &mut stream, &mut sv, &mut scratch);
            for (xi, &x) in xs.iter().enumerate() {
                let mut v: i64 = 0;
                let mut sign = 1i64;
                for &sigma in &sv {
                    if exceeds(sigma, x, scale) {
                        v += sign;
                    }
                    sign = -sign;
                }
                sums[xi] += v;
                sq_sums[xi] += (v * v) as u64;
            }
        }
        (sums, sq_sums)
    });
    let mut sums = vec![0i64; xs.len()];
    let mut sq_sums = vec![0u64; xs.len()];
    for (s, q) in per_chunk {
        for i in 0..xs.len() {
            sums[i] += s[i];
            sq_sums[i] += q[i];
        }
    }
    let n = cfg.n_samples as f64;
    Ok((0..xs.len())
        .map(|i| {
            let mean = sums[i] as f64 / n;
            let var = (sq_sums[i] as f64 - n * mean * mean) / (n - 1.0);
            TailEstimate {
                value: mean,
                stderr: (var.max(0.0) / n).sqrt(),
                n_samples: cfg.n_samples,
                seed: cfg.seed,
            }
        })
        .collect())
}

/// Monte Carlo estimate of `Pr(lambda_2 >= x) / Pr(lambda_1 >= x)` over a
/// threshold grid, with a delta-method standard error that accounts for
/// the nesting of the two events (`lambda_2 >= x` implies
/// `lambda_1 >= x`):
///
/// ```text
/// Var(r) ~= p2 * ((1 - p2) - r (1 - p1)) / (n * p1^2)
/// ```
///
/// An empty denominator yields `NaN` with the `EmptyDenominator` flag;
/// numerator counts below 10 are flagged `FewTailSamples`.
pub fn lemma1_ratio_curve(
    p: &WishartParams,
    xs: &[f64],
    scale: ThresholdScale,
    cfg: &McConfig,
) -> Result<Vec<RatioEstimate>> {
    cfg.validate()?;
    validate_grid(xs)?;
    let counts = eigen_tail_counts(p, xs, scale, cfg);
    let m = p.m();
    let n = cfg.n_samples as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let c1 = counts[xi * m];
            let c2 = counts[xi * m + 1];
            if c1 == 0 {
                return RatioEstimate {
                    x,
                    ratio: f64::NAN,
                    stderr: f64::NAN,
                    numer_count: c2,
                    denom_count: c1,
                    flag: RatioFlag::EmptyDenominator,
                };
            }
            let p1 = c1 as f64 / n;
            let p2 = c2 as f64 / n;
            let r = p2 / p1;
            let var = p2 * ((1.0 - p2) - r * (1.0 - p1)) / (n * p1 * p1);
            RatioEstimate {
                x,
                ratio: r,
                stderr: var.max(0.0).sqrt(),
                numer_count: c2,
                denom_count: c1,
                flag: if c2 < 10 {
                    RatioFlag::FewTailSamples
                } else {
                    RatioFlag::Ok
                },
            }
        })
        .collect())
}
