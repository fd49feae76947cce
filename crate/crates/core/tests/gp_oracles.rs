use std::f64::consts::PI;

use gpsnap_core::gp::{
    estimate_delta, fit_hyperparameters, from_log_space, kernel_matrix, log_marginal_likelihood,
    rbf_kernel, search_box, start_points, JITTER,
};
use gpsnap_core::{Error, GpModel, Hyperparameters, MultiStart, TrainingSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hyp(sf2: f64, l: f64, sn2: f64) -> Hyperparameters {
    Hyperparameters {
        sigma_f2: sf2,
        length_scale: l,
        sigma_n2: sn2,
    }
}

fn dense_k(x: &[f64], h: &Hyperparameters) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = x[i] - x[j];
        h.sigma_f2 * (-d * d / (2.0 * h.length_scale * h.length_scale)).exp()
            + if i == j {
                h.sigma_n2 + JITTER * h.sigma_f2
            } else {
                0.0
            }
    })
}

fn kvec(x: &[f64], q: f64, h: &Hyperparameters) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        x.iter()
            .map(|xi| h.sigma_f2 * (-(xi - q).powi(2) / (2.0 * h.length_scale.powi(2))).exp()),
    )
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u = |r: &mut ChaCha8Rng| ((r.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let (a, b) = (u(rng), u(rng));
    (-2.0 * a.ln()).sqrt() * (2.0 * PI * b).cos()
}

const X6: [f64; 6] = [0.0, 0.07, 0.2, 0.31, 0.38, 0.5];
const Y6: [f64; 6] = [1.0e-5, 2.5e-5, -0.3e-5, 1.1e-5, -2.0e-5, 0.4e-5];

#[test]
fn posterior_matches_dense_inverse() {
    let h = hyp(4e-10, 0.12, 1e-14);
    let m = GpModel::new(h, TrainingSet::scalar(&X6, &Y6).unwrap()).unwrap();
    let kinv = dense_k(&X6, &h).try_inverse().unwrap();
    let y = DVector::from_column_slice(&Y6);
    let queries = [0.0, 0.03, 0.11, 0.25, 0.44, 0.5];
    let p = m.posterior(&queries).unwrap();
    let ymax = Y6.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (i, &qi) in queries.iter().enumerate() {
        let ki = kvec(&X6, qi, &h);
        let mean = (ki.transpose() * &kinv * &y)[(0, 0)];
        assert!(
            (p.mean[i] - mean).abs() <= 1e-9 * ymax,
            "{} vs {mean}",
            p.mean[i]
        );
        for (j, &qj) in queries.iter().enumerate() {
            let kj = kvec(&X6, qj, &h);
            let cov = rbf_kernel(qi, qj, &h) - (ki.transpose() * &kinv * &kj)[(0, 0)];
            assert!((p.cov[i * 6 + j] - cov).abs() <= 1e-9 * h.sigma_f2);
        }
    }
}

#[test]
fn training_points_are_interpolated() {
    let h = hyp(4e-10, 0.12, 0.0);
    let m = GpModel::new(h, TrainingSet::scalar(&X6, &Y6).unwrap()).unwrap();
    let ymax = Y6.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (x, y) in X6.iter().zip(Y6) {
        let (mean, var) = m.predict(&[*x]).unwrap();
        assert!((mean - y).abs() <= 1e-8 * ymax);
        assert!(var <= 1e-8 * h.sigma_f2);
    }
}

#[test]
fn log_marginal_likelihood_matches_naive_formula() {
    let x = [0.01, 0.13, 0.25, 0.37];
    let y = [-6e-5, 0.9e-5, 3.8e-5, 0.8e-5];
    let h = hyp(2e-9, 0.2, 1e-13);
    let k = dense_k(&x, &h);
    let yv = DVector::from_column_slice(&y);
    let naive = -0.5 * (yv.transpose() * k.clone().try_inverse().unwrap() * &yv)[(0, 0)]
        - 0.5 * k.determinant().ln()
        - 2.0 * (2.0 * PI).ln();
    let got = log_marginal_likelihood(&h, &TrainingSet::scalar(&x, &y).unwrap()).unwrap();
    assert!(
        (got - naive).abs() <= 1e-9 * naive.abs(),
        "{got} vs {naive}"
    );
}

#[test]
fn single_zero_target_likelihood() {
    let h = hyp(2.0, 0.1, 0.5);
    let got = log_marginal_likelihood(&h, &TrainingSet::scalar(&[0.3], &[0.0]).unwrap()).unwrap();
    let want = -0.5 * (2.0 + 0.5 + JITTER * 2.0_f64).ln() - 0.5 * (2.0 * PI).ln();
    assert!((got - want).abs() <= 1e-14);
}

#[test]
fn two_point_posterior_by_hand() {
    let h = hyp(1.0, 1.0, 0.0);
    let m = GpModel::new(h, TrainingSet::scalar(&[0.0, 1.0], &[1.0, -1.0]).unwrap()).unwrap();
    let a = 1.0 + JITTER;
    let c = (-0.5_f64).exp();
    let det = a * a - c * c;
    let alpha = [(a * 1.0 - -c) / det, (-a - c * 1.0) / det];
    for (got, want) in m.alpha().iter().zip(alpha) {
        assert!((got - want).abs() <= 1e-10 * want.abs());
    }
    let q = 0.5;
    let k = [(-0.125_f64).exp(), (-0.125_f64).exp()];
    let (mean, var) = m.predict(&[q]).unwrap();
    assert!((mean - (k[0] * alpha[0] + k[1] * alpha[1])).abs() <= 1e-10);
    // symmetric data gives a zero mean at the midpoint
    assert!(mean.abs() <= 1e-10);
    let quad = (a * (k[0] * k[0] + k[1] * k[1]) - 2.0 * c * k[0] * k[1]) / det;
    assert!((var - (1.0 - quad)).abs() <= 1e-10);
}

#[test]
fn kernel_matrix_is_positive_semidefinite() {
    for l in [1e-3, 0.05, 0.3, 10.0] {
        let h = hyp(2.0, l, 0.0);
        let x: Vec<f64> = (0..40).map(|i| 0.5 * (i as f64 / 39.0).powf(1.7)).collect();
        let k = DMatrix::from_row_slice(40, 40, &kernel_matrix(&x, &x, 1, &h));
        let min = k.symmetric_eigenvalues().min();
        assert!(min >= -1e-12 * h.sigma_f2, "lambda = {l}: {min}");
    }
}

#[test]
fn posterior_is_translation_invariant() {
    let h = hyp(1e-9, 0.1, 1e-14);
    let a = GpModel::new(h, TrainingSet::scalar(&X6, &Y6).unwrap()).unwrap();
    let shift = 3.7;
    let xs: Vec<f64> = X6.iter().map(|x| x + shift).collect();
    let b = GpModel::new(h, TrainingSet::scalar(&xs, &Y6).unwrap()).unwrap();
    for q in [0.05, 0.21, 0.47] {
        let (ma, va) = a.predict(&[q]).unwrap();
        let (mb, vb) = b.predict(&[q + shift]).unwrap();
        assert!((ma - mb).abs() <= 1e-9 * 3e-5);
        assert!((va - vb).abs() <= 1e-9 * h.sigma_f2);
    }
}

#[test]
fn fit_recovers_length_scale_of_a_draw() {
    let truth = hyp(1.0, 0.15, 1e-8);
    let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let chol = dense_k(&x, &truth).cholesky().unwrap();
    let mut estimates = Vec::new();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_iterator(20, (0..20).map(|_| gaussian(&mut rng)));
        let y = chol.l() * z;
        let fit = fit_hyperparameters(
            &TrainingSet::scalar(&x, y.as_slice()).unwrap(),
            &MultiStart::default(),
        )
        .unwrap();
        estimates.push(fit.length_scale);
    }
    estimates.sort_by(f64::total_cmp);
    let median = estimates[2];
    assert!(
        median / truth.length_scale < 2.0 && truth.length_scale / median < 2.0,
        "{estimates:?}"
    );
}

#[test]
fn fit_beats_every_start_point() {
    let train = TrainingSet::scalar(
        &[0.01, 0.13, 0.25, 0.37, 0.49],
        &[-5.9e-5, 0.86e-5, 3.8e-5, 0.86e-5, -5.9e-5],
    )
    .unwrap();
    let ms = MultiStart::default();
    let fit = fit_hyperparameters(&train, &ms).unwrap();
    let best = log_marginal_likelihood(&fit, &train).unwrap();
    let (lo, hi) = search_box(&train);
    for s in start_points(&train, &ms) {
        assert!(s
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(v, (l, h))| l <= v && v <= h));
        if let Ok(v) = log_marginal_likelihood(&from_log_space(&s), &train) {
            assert!(best >= v, "{best} < {v}");
        }
    }
    assert_eq!(fit, fit_hyperparameters(&train, &ms).unwrap());
    let m = GpModel::new(fit, train).unwrap();
    assert!(
        (estimate_delta(&m, 0.0).unwrap() - estimate_delta(&m, 0.5).unwrap()).abs() <= 0.1 * 5.9e-5
    );
}

#[test]
fn duplicate_inputs_need_noise() {
    let train = TrainingSet::scalar(&[0.1, 0.1, 0.3, 0.4], &[1.0, 1.2, 0.3, -0.2]).unwrap();
    let fit = fit_hyperparameters(&train, &MultiStart::default()).unwrap();
    assert!(fit.sigma_n2 > 1e-6, "{fit:?}");
    assert!(matches!(
        GpModel::new(
            Hyperparameters {
                sigma_n2: 0.0,
                ..fit
            },
            train.clone()
        ),
        Err(Error::IllConditionedKernel { pivot: 1 })
    ));
    let (mean, _) = GpModel::new(fit, train).unwrap().predict(&[0.1]).unwrap();
    assert!(mean > 1.0 && mean < 1.2);
}

#[test]
fn invalid_inputs_are_rejected() {
    let one = TrainingSet::scalar(&[0.25], &[1.0]).unwrap();
    assert!(matches!(
        fit_hyperparameters(&one, &MultiStart::default()),
        Err(Error::InvalidInput(_))
    ));
    assert!(TrainingSet::scalar(&[0.1, 0.2], &[1.0]).is_err());
    assert!(GpModel::new(hyp(-1.0, 0.1, 0.0), one.clone()).is_err());
    assert!(GpModel::new(hyp(1.0, 0.0, 0.0), one.clone()).is_err());
    assert!(GpModel::new(hyp(1.0, 0.1, -1e-9), one.clone()).is_err());
    let m = GpModel::new(hyp(1.0, 0.1, 0.0), one).unwrap();
    assert!(m.posterior(&[f64::NAN]).is_err());
}

fn arb_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0..0.5f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            0.02..0.5f64,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_is_linear_in_targets((x, y, l) in arb_problem(), c in -3.0..3.0f64, q in 0.0..0.5f64) {
        let h = hyp(1.0, l, 1e-3);
        let y2: Vec<f64> = y.iter().rev().copied().collect();
        let mix: Vec<f64> = y.iter().zip(&y2).map(|(a, b)| c * a + b).collect();
        let mean = |t: &[f64]| GpModel::new(h, TrainingSet::scalar(&x, t).unwrap()).unwrap().predict(&[q]).unwrap().0;
        let (a, b, m) = (mean(&y), mean(&y2), mean(&mix));
        prop_assert!((m - (c * a + b)).abs() <= 1e-8 * (1.0 + c.abs()) * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn variance_is_nonnegative_and_shrinks_with_data((x, y, l) in arb_problem(), q in -0.2..0.7f64, extra in 0.0..0.5f64) {
        let h = hyp(1.0, l, 1e-4);
        let m = GpModel::new(h, TrainingSet::scalar(&x, &y).unwrap()).unwrap();
        let (_, v) = m.predict(&[q]).unwrap();
        prop_assert!((0.0..=h.sigma_f2 * (1.0 + 1e-12)).contains(&v));
        let mut x2 = x.clone();
        x2.push(extra);
        let mut y2 = y.clone();
        y2.push(0.3);
        let (_, v2) = GpModel::new(h, TrainingSet::scalar(&x2, &y2).unwrap()).unwrap().predict(&[q]).unwrap();
        prop_assert!(v2 <= v + 1e-9, "{v2} > {v}");
    }
}
