//! Zero-mean Gaussian-process regression with a squared-exponential kernel.
//!
//! The kernel is `σ_f²·exp(−‖x − x′‖²/(2λ²))` with a length scale `λ`. A
//! kernel written with a precision `ℓ` multiplying the squared distance
//! corresponds to `ℓ = 1/λ²`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};
use crate::optim::minimize_box;

/// Relative diagonal jitter added on every factorization.
pub const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    /// Signal variance `σ_f²`.
    pub sigma_f2: f64,
    /// Length scale `λ`, in input units.
    pub length_scale: f64,
    /// Noise variance `σ_n²`.
    pub sigma_n2: f64,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_f2", self.sigma_f2),
            ("length_scale", self.length_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        // zero noise is the jitter-only limit
        if !(self.sigma_n2 >= 0.0 && self.sigma_n2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma_n2 must be non-negative and finite, got {}",
                self.sigma_n2
            )));
        }
        Ok(())
    }

    /// The precision `ℓ = 1/λ²`.
    pub fn precision(&self) -> f64 {
        1.0 / (self.length_scale * self.length_scale)
    }
}

/// Training inputs (row-major, `dim` coordinates per point) and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "input dimension must be at least 1".into(),
            ));
        }
        if inputs.len() != dim * targets.len() {
            return Err(Error::LengthMismatch {
                expected: dim * targets.len(),
                got: inputs.len(),
            });
        }
        if inputs.iter().chain(&targets).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }
        Ok(Self {
            dim,
            inputs,
            targets,
        })
    }

    /// One-dimensional inputs.
    pub fn scalar(positions: &[f64], targets: &[f64]) -> Result<Self> {
        Self::new(1, positions.to_vec(), targets.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// True when `x` lies in the axis-aligned bounding box of the inputs.
    pub fn in_hull(&self, x: &[f64]) -> bool {
        if self.is_empty() || x.len() != self.dim {
            return false;
        }
        (0..self.dim).all(|d| {
            let (lo, hi) = (0..self.len())
                .map(|i| self.inputs[i * self.dim + d])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(v), b.max(v))
                });
            x[d] >= lo && x[d] <= hi
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Kernel value between two scalar positions.
pub fn rbf_kernel(rho: f64, rho_p: f64, hyp: &Hyperparameters) -> f64 {
    rbf_kernel_points(&[rho], &[rho_p], hyp)
}

pub fn rbf_kernel_points(a: &[f64], b: &[f64], hyp: &Hyperparameters) -> f64 {
    let l2 = hyp.length_scale * hyp.length_scale;
    hyp.sigma_f2 * libm::exp(-sq_dist(a, b) / (2.0 * l2))
}

/// Row-major `|pa| × |pb|` kernel matrix; points are `dim` coordinates each.
pub fn kernel_matrix(pa: &[f64], pb: &[f64], dim: usize, hyp: &Hyperparameters) -> Vec<f64> {
    let na = pa.len() / dim;
    let nb = pb.len() / dim;
    let mut k = vec![0.0; na * nb];
    for i in 0..na {
        for j in 0..nb {
            k[i * nb + j] = rbf_kernel_points(
                &pa[i * dim..(i + 1) * dim],
                &pb[j * dim..(j + 1) * dim],
                hyp,
            );
        }
    }
    k
}

fn factor(hyp: &Hyperparameters, train: &TrainingSet) -> Result<Cholesky> {
    let n = train.len();
    if hyp.sigma_n2 == 0.0 {
        for i in 0..n {
            if (0..i).any(|j| train.point(i) == train.point(j)) {
                return Err(Error::IllConditionedKernel { pivot: i });
            }
        }
    }
    let mut k = kernel_matrix(&train.inputs, &train.inputs, train.dim, hyp);
    let diag = hyp.sigma_n2 + JITTER * hyp.sigma_f2;
    for i in 0..n {
        k[i * n + i] += diag;
    }
    Cholesky::factor(&k, n).map_err(|pivot| Error::IllConditionedKernel { pivot })
}

/// Posterior mean vector and row-major covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl Posterior {
    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean.len();
        (0..m).map(|i| self.cov[i * m + i]).collect()
    }
}

/// A conditioned GP: hyperparameters, data and the cached factorization of
/// `K + (σ_n² + jitter)I`.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyp: Hyperparameters,
    train: TrainingSet,
    chol: Cholesky,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn new(hyp: Hyperparameters, train: TrainingSet) -> Result<Self> {
        hyp.validate()?;
        if train.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        let chol = factor(&hyp, &train)?;
        let alpha = chol.solve(&train.targets);
        Ok(Self {
            hyp,
            train,
            chol,
            alpha,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyp
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.train
    }

    /// `(K + σ_n²I)⁻¹ y`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        (0..self.train.len())
            .map(|i| rbf_kernel_points(self.train.point(i), x, &self.hyp))
            .collect()
    }

    /// Posterior at the query points `p_star` (`dim` coordinates each).
    pub fn posterior(&self, p_star: &[f64]) -> Result<Posterior> {
        let dim = self.train.dim;
        if !p_star.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(
                "query length is not a multiple of the input dimension".into(),
            ));
        }
        if p_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite query point".into()));
        }
        let m = p_star.len() / dim;
        let mut mean = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m);
        for j in 0..m {
            let ks = self.cross(&p_star[j * dim..(j + 1) * dim]);
            mean.push(dot(&ks, &self.alpha));
            v.push(self.chol.solve_lower(&ks));
        }
        let kss = kernel_matrix(p_star, p_star, dim, &self.hyp);
        let mut cov = vec![0.0; m * m];
        let tol = 1e-12 * self.hyp.sigma_f2;
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] = kss[i * m + j] - dot(&v[i], &v[j]);
            }
            let d = &mut cov[i * m + i];
            if *d < -tol {
                return Err(Error::IllConditionedKernel { pivot: i });
            }
            *d = d.max(0.0);
        }
        Ok(Posterior { mean, cov })
    }

    /// Mean and variance at a single point.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let p = self.posterior(x)?;
        if p.mean.len() != 1 {
            return Err(Error::InvalidInput(
                "predict takes exactly one point".into(),
            ));
        }
        Ok((p.mean[0], p.cov[0]))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        lml_from(&self.chol, &self.alpha, &self.train.targets)
    }
}

fn lml_from(chol: &Cholesky, alpha: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    -0.5 * dot(y, alpha) - 0.5 * chol.log_det() - 0.5 * n * libm::log(2.0 * core::f64::consts::PI)
}

/// `log p(y | P, hyp)`.
pub fn log_marginal_likelihood(hyp: &Hyperparameters, train: &TrainingSet) -> Result<f64> {
    hyp.validate()?;
    let chol = factor(hyp, train)?;
    let alpha = chol.solve(&train.targets);
    Ok(lml_from(&chol, &alpha, &train.targets))
}

/// Posterior mean of a scalar-input model at `rho_star`.
pub fn estimate_delta(model: &GpModel, rho_star: f64) -> Result<f64> {
    Ok(model.posterior(&[rho_star])?.mean[0])
}

/// Multi-start search configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiStart {
    pub starts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self {
            starts: 16,
            max_evals: 500,
            seed: 0x5eed,
        }
    }
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Search box in `(ln σ_f², ln λ, ln σ_n²)` derived from the data scale.
pub fn search_box(train: &TrainingSet) -> ([f64; 3], [f64; 3]) {
    let y = &train.targets;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let power = y.iter().map(|v| v * v).sum::<f64>() / n;
    let scale = if power > 0.0 { power } else { 1.0 };
    let floor = if var > 0.0 {
        1e-12 * var
    } else {
        1e-12 * scale
    };
    let mut span = 0.0_f64;
    for i in 0..train.len() {
        for j in 0..i {
            span = span.max(libm::sqrt(sq_dist(train.point(i), train.point(j))));
        }
    }
    if span == 0.0 {
        span = 1.0;
    }
    let ln = libm::log;
    (
        [ln(1e-4 * scale), ln(1e-2 * span), ln(floor)],
        [ln(1e4 * scale), ln(1e2 * span), ln(10.0 * scale)],
    )
}

/// Start points of the multi-start search, in `(ln σ_f², ln λ, ln σ_n²)`.
/// The first sits at a heuristic center of the box; the rest are uniform
/// draws from the seeded generator.
pub fn start_points(train: &TrainingSet, strategy: &MultiStart) -> Vec<[f64; 3]> {
    let (lo, hi) = search_box(train);
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    (0..strategy.starts)
        .map(|s| {
            if s == 0 {
                [
                    0.5 * (lo[0] + hi[0]),
                    lo[1] + libm::log(50.0),
                    lo[2] + 0.25 * (hi[2] - lo[2]),
                ]
            } else {
                core::array::from_fn(|i| lo[i] + unit_uniform(&mut rng) * (hi[i] - lo[i]))
            }
        })
        .collect()
}

/// Hyperparameters at a point of the log-space search.
pub fn from_log_space(x: &[f64]) -> Hyperparameters {
    Hyperparameters {
        sigma_f2: libm::exp(x[0]),
        length_scale: libm::exp(x[1]),
        sigma_n2: libm::exp(x[2]),
    }
}

/// Maximizes the log marginal likelihood over a log-space box with a
/// deterministic multi-start Nelder–Mead search. The result is at least as
/// likely as every start point.
pub fn fit_hyperparameters(train: &TrainingSet, strategy: &MultiStart) -> Result<Hyperparameters> {
    if train.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "hyperparameter fitting needs at least 2 training points, got {}",
            train.len()
        )));
    }
    if strategy.starts == 0 || strategy.max_evals == 0 {
        return Err(Error::InvalidConfig(
            "multi-start needs at least one start and one evaluation".into(),
        ));
    }
    let (lo, hi) = search_box(train);
    let objective = |x: &[f64]| match log_marginal_likelihood(&from_log_space(x), train) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in start_points(train, strategy) {
        let m = minimize_box(objective, &x0, &lo, &hi, strategy.max_evals);
        // strict comparison keeps the earliest start on ties
        if m.value.is_finite() && best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    match best {
        Some((_, x)) => Ok(from_log_space(&x)),
        None => Err(Error::FitFailure(
            "kernel factorization failed at every start".into(),
        )),
    }
}
