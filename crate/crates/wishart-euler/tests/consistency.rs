//! Cross-module consistency: the closed form, the quadrature, and the
//! sampler must describe one family, and the canonical reduction must
//! preserve the singular-value law it claims to.

use wishart_euler::central::{expected_euler_central, CentralSpec};
use wishart_euler::linalg::{
    canonicalize, singular_values, sym_eigendecomposition, Matrix, WishartParams,
};
use wishart_euler::mc::{
    estimate_expected_euler, sample_matrix, McConfig, McStream, ThresholdScale,
};
use wishart_euler::nc2::{expected_euler_2x2, Params2x2, QuadratureSpec};

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn canonical_reduction_preserves_largest_singular_value_law() {
    let sigma = Matrix::from_rows(vec![vec![2.0, 0.6], vec![0.6, 1.0]]).unwrap();
    let mean = Matrix::from_rows(vec![vec![1.0, -0.5, 0.2], vec![0.3, 0.8, -1.1]]).unwrap();

    // Square root of the covariance, checked against its definition.
    let (p, eig) = sym_eigendecomposition(&sigma).unwrap();
    let mut diag = Matrix::zeros(2, 2);
    for (i, e) in eig.iter().enumerate() {
        diag.set(i, i, e.sqrt());
    }
    let root = p.matmul(&diag).unwrap().matmul(&p.transpose()).unwrap();
    let mut err = 0.0f64;
    let square = root.matmul(&root).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            err += (square.get(i, j) - sigma.get(i, j)).powi(2);
        }
    }
    assert!(err.sqrt() <= 1e-12, "matrix square root residual {err:e}");

    let n_draws = 20_000;
    let mut direct = Vec::with_capacity(n_draws);
    let mut stream = McStream::new(11, 0);
    for _ in 0..n_draws {
        let mut g = Matrix::zeros(2, 3);
        for i in 0..2 {
            for j in 0..3 {
                g.set(i, j, stream.next_normal());
            }
        }
        let mut a = root.matmul(&g).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                a.set(i, j, a.get(i, j) + mean.get(i, j));
            }
        }
        direct.push(singular_values(&a).unwrap()[0]);
    }

    let params = canonicalize(&sigma, &mean).unwrap();
    let mut reduced = Vec::with_capacity(n_draws);
    let mut stream = McStream::new(12, 0);
    for _ in 0..n_draws {
        let a = sample_matrix(&params, &mut stream);
        reduced.push(singular_values(&a).unwrap()[0]);
    }

    let d = ks_statistic(direct, reduced);
    // 1% critical value for equal two-sample sizes.
    let critical = 1.628 * (2.0 / n_draws as f64).sqrt();
    assert!(
        d <= critical,
        "KS statistic {d:.5} above the 1% critical value {critical:.5}"
    );
}

#[test]
fn quadrature_matches_closed_form_for_scalar_covariance() {
    let q = QuadratureSpec {
        tol: 1e-8,
        ..QuadratureSpec::default()
    };
    for s in [0.5, 1.0, 2.0] {
        let p = Params2x2::new(s, s, 0.0, 0.0, 0.0).unwrap();
        let spec = CentralSpec::new(2, 2, s).unwrap();
        for x in [1.0, 2.0, 3.0] {
            let quad = expected_euler_2x2(&p, x, &q).unwrap();
            let closed = expected_euler_central(&spec, x).unwrap();
            assert!(
                (quad.value - closed).abs() <= 1e-6,
                "s = {s}, x = {x}: quadrature {} vs closed form {closed}",
                quad.value
            );
        }
    }
}

#[test]
fn sampling_agrees_with_quadrature_for_noncentral_2x2() {
    let p = Params2x2::new(2.0, 1.0, 1.0, -1.0, 1.0).unwrap();
    let q = QuadratureSpec {
        tol: 1e-8,
        ..QuadratureSpec::default()
    };
    let x = 1.5;
    let quad = expected_euler_2x2(&p, x, &q).unwrap();

    let mean = Matrix::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 1.0]]).unwrap();
    let params = WishartParams::new(vec![2.0, 1.0], mean).unwrap();
    let cfg = McConfig {
        n_samples: 200_000,
        seed: 5,
        chunk_size: 16_384,
    };
    let est =
        &estimate_expected_euler(&params, &[x], ThresholdScale::SingularValue, &cfg).unwrap()[0];
    assert!(
        (est.value - quad.value).abs() <= 3.0 * est.stderr + q.tol,
        "sampled {} +- {} vs quadrature {}",
        est.value,
        est.stderr,
        quad.value
    );
}

#[test]
fn sampling_agrees_with_closed_form_across_shapes() {
    // The alternating tail sum estimated by sampling equals the closed
    // form exactly, at every threshold, so the only gap is Monte Carlo
    // noise.
    let cfg = McConfig {
        n_samples: 100_000,
        seed: 1,
        chunk_size: 16_384,
    };
    for (m, n, x) in [(2u32, 2u32, 2.0), (3, 3, 3.0), (3, 5, 3.2), (10, 12, 5.0)] {
        let spec = CentralSpec::new(m, n, 1.0).unwrap();
        let closed = expected_euler_central(&spec, x).unwrap();
        let params =
            WishartParams::new(vec![1.0; m as usize], Matrix::zeros(m as usize, n as usize))
                .unwrap();
        let est = &estimate_expected_euler(&params, &[x], ThresholdScale::SingularValue, &cfg)
            .unwrap()[0];
        assert!(
            (est.value - closed).abs() <= 3.0 * est.stderr,
            "m = {m}, n = {n}, x = {x}: sampled {} +- {} vs closed form {closed}",
            est.value,
            est.stderr
        );
    }
}
