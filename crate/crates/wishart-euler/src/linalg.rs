//! Small dense matrix kernels and the canonical reduction of Wishart
//! parameters.
//!
//! Everything operates on desk-scale matrices (dimension at most 64), so
//! the implementations favor unconditional stability and determinism over
//! asymptotic speed: symmetric eigendecomposition by cyclic Jacobi sweeps,
//! LQ factorization by Householder reflections on the transpose, singular
//! values by Jacobi on the Gram matrix with a closed form for the `2 x 2`
//! hot path.

use crate::{Error, Result};

/// Dense row-major matrix of finite doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting shape mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "matrix entries must be finite, got {bad}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument(
                "rows have inconsistent lengths".to_string(),
            ));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// All-zero matrix. Panics on zero dimensions.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entry slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Largest admissible matrix order for the dense eigensolver.
const MAX_EIGEN_SIZE: usize = 64;

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Returns `(P, d)` with eigenvector columns in `P` and eigenvalues `d` in
/// descending order, so `P^T S P = diag(d)` to 1e-12 relative. Each
/// eigenvector column is normalized to have a nonnegative first
/// non-negligible entry, making the output deterministic.
pub fn sym_eigendecomposition(s: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let n = s.rows;
    if n != s.cols {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    if n > MAX_EIGEN_SIZE {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition supports order <= {MAX_EIGEN_SIZE}, got {n}"
        )));
    }
    let norm = s.frobenius_norm();
    let mut max_asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if max_asym > 1e-12 * norm.max(1e-30) {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }

    let mut b = s.clone();
    let mut v = Matrix::identity(n);
    if norm > 0.0 {
        jacobi_sweeps(&mut b, &mut v, norm)?;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| b.get(i, i)).collect();
    order.sort_by(|&a, &c| diag[c].partial_cmp(&diag[a]).unwrap());

    let mut p = Matrix::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        d.push(diag[src]);
        let mut flip = 1.0;
        for i in 0..n {
            let e = v.get(i, src);
            if e.abs() > 1e-12 {
                if e < 0.0 {
                    flip = -1.0;
                }
                break;
            }
        }
        for i in 0..n {
            p.set(i, col, flip * v.get(i, src));
        }
    }
    Ok((p, d))
}

/// Runs cyclic Jacobi sweeps on `b` in place, accumulating rotations into
/// `v`, until the off-diagonal mass is negligible relative to `norm`.
fn jacobi_sweeps(b: &mut Matrix, v: &mut Matrix, norm: f64) -> Result<()> {
    let n = b.rows;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += b.get(i, j) * b.get(i, j);
                }
            }
        }
        if off.sqrt() <= 1e-13 * norm {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = b.get(p, q);
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (b.get(q, q) - b.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let bkp = b.get(k, p);
                    let bkq = b.get(k, q);
                    b.set(k, p, c * bkp - s * bkq);
                    b.set(k, q, s * bkp + c * bkq);
                }
                for k in 0..n {
                    let bpk = b.get(p, k);
                    let bqk = b.get(q, k);
                    b.set(p, k, c * bpk - s * bqk);
                    b.set(q, k, s * bpk + c * bqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Jacobi eigendecomposition",
        detail: format!("order {n} matrix still off-diagonal after 100 sweeps"),
    })
}

/// LQ factorization `M = N Q` with `N` lower-triangular (`m x n`, exact
/// zeros above the diagonal, nonnegative diagonal) and `Q` orthogonal
/// (`n x n`).
///
/// Computed as a Householder QR of the transpose; requires `rows <= cols`.
#[allow(clippy::needless_range_loop)]
pub fn lq_decomposition(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if m.rows > m.cols {
        return Err(Error::InvalidArgument(format!(
            "lq_decomposition needs rows <= cols, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.cols;
    let k = m.rows;
    let mut r = m.transpose();
    let mut q = Matrix::identity(n);
    let mut v = vec![0.0; n];

    for col in 0..k {
        let mut norm_sq = 0.0;
        for i in col..n {
            let e = r.get(i, col);
            norm_sq += e * e;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let norm = norm_sq.sqrt();
        let head = r.get(col, col);
        let alpha = if head >= 0.0 { -norm } else { norm };
        v[col] = head - alpha;
        for i in (col + 1)..n {
            v[i] = r.get(i, col);
        }
        let v_norm_sq: f64 = (col..n).map(|i| v[i] * v[i]).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        for j in col..k {
            let dot: f64 = (col..n).map(|i| v[i] * r.get(i, j)).sum();
            let factor = 2.0 * dot / v_norm_sq;
            for i in col..n {
                let e = r.get(i, j);
                r.set(i, j, e - factor * v[i]);
            }
        }
        for row in 0..n {
            let dot: f64 = (col..n).map(|l| q.get(row, l) * v[l]).sum();
            let factor = 2.0 * dot / v_norm_sq;
            for l in col..n {
                let e = q.get(row, l);
                q.set(row, l, e - factor * v[l]);
            }
        }
    }

    // M^T = Q R, so M = R^T Q^T.
    let mut lower = r.transpose();
    let mut q_out = q.transpose();
    for i in 0..k {
        for j in (i + 1)..n {
            lower.set(i, j, 0.0);
        }
    }
    for i in 0..k {
        if lower.get(i, i) < 0.0 {
            for row in 0..k {
                let e = lower.get(row, i);
                lower.set(row, i, -e);
            }
            for colq in 0..n {
                let e = q_out.get(i, colq);
                q_out.set(i, colq, -e);
            }
        }
    }
    Ok((lower, q_out))
}

/// Singular values of an `m x n` matrix (`n >= m`), descending.
///
/// The `2 x 2` case uses the trace/discriminant closed form of the Gram
/// matrix; larger cases run the Jacobi eigensolver on `A A^T` and take
/// square roots (negatives from roundoff are clamped to zero).
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.rows > a.cols {
        return Err(Error::InvalidArgument(format!(
            "singular_values needs rows <= cols, got {}x{}",
            a.rows, a.cols
        )));
    }
    if a.rows == 2 {
        let mut w11 = 0.0;
        let mut w12 = 0.0;
        let mut w22 = 0.0;
        for j in 0..a.cols {
            let (x, y) = (a.get(0, j), a.get(1, j));
            w11 += x * x;
            w12 += x * y;
            w22 += y * y;
        }
        let trace = w11 + w22;
        let disc = (w11 - w22).hypot(2.0 * w12);
        let l1 = ((trace + disc) / 2.0).max(0.0);
        let l2 = ((trace - disc) / 2.0).max(0.0);
        return Ok(vec![l1.sqrt(), l2.sqrt()]);
    }
    let gram = a.matmul(&a.transpose())?;
    let (_, eig) = sym_eigendecomposition(&gram)?;
    Ok(eig.into_iter().map(|e| e.max(0.0).sqrt()).collect())
}

/// Parameters of the canonical Wishart sampling problem: row `i` of the
/// Gaussian part has precision `scales[i]` (that is, variance
/// `1/scales[i]`), and the mean matrix is lower triangular with a
/// nonnegative diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WishartParams {
    scales: Vec<f64>,
    mean: Matrix,
}

impl WishartParams {
    /// Validates and builds canonical parameters.
    pub fn new(scales: Vec<f64>, mean: Matrix) -> Result<Self> {
        let m = scales.len();
        let n = mean.cols;
        if mean.rows != m {
            return Err(Error::InvalidArgument(format!(
                "mean has {} rows but there are {m} scales",
                mean.rows
            )));
        }
        if m < 2 || n < m {
            return Err(Error::InvalidArgument(format!(
                "need n >= m >= 2, got m={m}, n={n}"
            )));
        }
        if let Some(bad) = scales.iter().find(|s| !s.is_finite() || **s <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scales must be positive and finite, got {bad}"
            )));
        }
        for i in 0..m {
            for j in 0..n {
                let e = mean.get(i, j);
                if j > i && e != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "mean must be lower triangular, entry ({i},{j}) = {e}"
                    )));
                }
                if j == i && e < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "mean diagonal must be nonnegative, entry ({i},{i}) = {e}"
                    )));
                }
            }
        }
        Ok(Self { scales, mean })
    }

    pub fn m(&self) -> usize {
        self.scales.len()
    }

    pub fn n(&self) -> usize {
        self.mean.cols
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn mean(&self) -> &Matrix {
        &self.mean
    }
}

/// Reduces a general `(Sigma, M)` pair to canonical form.
///
/// With `Sigma = P^T diag(d^2) P` (spectral decomposition, eigenvalues
/// descending), the singular values of `Sigma^(1/2) V + M` have the same
/// distribution as those of `diag(d) V' + N`, where `P M = N Q` is the LQ
/// reduction: orthogonal factors on either side leave both the singular
/// values and the standard Gaussian ensemble invariant. The returned
/// scales are `1/d_i^2`.
pub fn canonicalize(sigma: &Matrix, mean: &Matrix) -> Result<WishartParams> {
    if sigma.rows != sigma.cols {
        return Err(Error::InvalidArgument(format!(
            "covariance must be square, got {}x{}",
            sigma.rows, sigma.cols
        )));
    }
    if mean.rows != sigma.rows {
        return Err(Error::InvalidArgument(format!(
            "mean has {} rows, covariance is {}x{}",
            mean.rows, sigma.rows, sigma.cols
        )));
    }
    let (p, eig) = sym_eigendecomposition(sigma)?;
    let smallest = *eig.last().expect("nonempty");
    if smallest <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: smallest,
        });
    }
    let rotated = p.transpose().matmul(mean)?;
    let (lower, _q) = lq_decomposition(&rotated)?;
    let scales = eig.into_iter().map(|e| 1.0 / e).collect();
    WishartParams::new(scales, lower)
}
