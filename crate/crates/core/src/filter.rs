//! Rational discrete-time filters in the backward shift operator `q⁻¹`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `H(q⁻¹) = (b₀ + b₁q⁻¹ + …) / (a₀ + a₁q⁻¹ + …)`, coefficients stored in
/// ascending powers of `q⁻¹`. The denominator is not normalized; `a₀ ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl DiscreteTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidInput("empty filter polynomial".into()));
        }
        if den[0] == 0.0 {
            return Err(Error::InvalidInput("filter is not causal: a0 = 0".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite filter coefficient".into()));
        }
        Ok(Self { num, den })
    }

    /// Static gain `k`.
    pub fn gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    /// Pure delay `q⁻ⁿ`.
    pub fn delay(n: usize) -> Self {
        let mut num = vec![0.0; n + 1];
        num[n] = 1.0;
        Self {
            num,
            den: vec![1.0],
        }
    }

    /// Discretizes `N(s)/D(s)` (ascending powers of `s`) with the backward
    /// difference `s ← (1 − q⁻¹)/T_s`.
    pub fn from_continuous(num_s: &[f64], den_s: &[f64], ts: f64) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(Error::InvalidInput("sampling time must be positive".into()));
        }
        Self::new(
            backward_difference(num_s, ts),
            backward_difference(den_s, ts),
        )
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Runs the difference equation from zero initial conditions.
    pub fn filter(&self, u: &[f64]) -> Vec<f64> {
        let a0 = self.den[0];
        let mut y = vec![0.0; u.len()];
        for k in 0..u.len() {
            let mut acc = 0.0;
            for (i, b) in self.num.iter().enumerate().take(k + 1) {
                acc += b * u[k - i];
            }
            for (i, a) in self.den.iter().enumerate().skip(1).take(k) {
                acc -= a * y[k - i];
            }
            y[k] = acc / a0;
        }
        y
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut u = vec![0.0; n];
        if n > 0 {
            u[0] = 1.0;
        }
        self.filter(&u)
    }

    /// Frequency response at `z = e^{jωT_s}`.
    pub fn response(&self, omega: f64, ts: f64) -> Complex64 {
        let zinv = Complex64::new(libm::cos(omega * ts), -libm::sin(omega * ts));
        eval(&self.num, zinv) / eval(&self.den, zinv)
    }

    /// Value at `q = 1`.
    pub fn dc_gain(&self) -> f64 {
        self.num.iter().sum::<f64>() / self.den.iter().sum::<f64>()
    }

    /// Series connection `self · other`.
    pub fn series(&self, other: &DiscreteTf) -> DiscreteTf {
        DiscreteTf {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
        }
    }

    /// Parallel connection `self + other`.
    pub fn parallel(&self, other: &DiscreteTf) -> DiscreteTf {
        DiscreteTf {
            num: poly_add(
                &poly_mul(&self.num, &other.den),
                &poly_mul(&other.num, &self.den),
            ),
            den: poly_mul(&self.den, &other.den),
        }
    }

    pub fn scaled(&self, k: f64) -> DiscreteTf {
        DiscreteTf {
            num: self.num.iter().map(|b| b * k).collect(),
            den: self.den.clone(),
        }
    }

    /// True when every pole lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        schur_stable(&self.den)
    }
}

fn eval(p: &[f64], zinv: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zinv + c)
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

/// Maps `Σ cₖ sᵏ` to a polynomial in `q⁻¹` under `s = (1 − q⁻¹)/T_s`.
pub fn backward_difference(coeffs_s: &[f64], ts: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs_s.len().max(1)];
    // (1 - q^-1)^k, built up incrementally
    let mut power = vec![1.0];
    for (k, &c) in coeffs_s.iter().enumerate() {
        let scale = c / libm::pow(ts, k as f64);
        for (i, p) in power.iter().enumerate() {
            out[i] += scale * p;
        }
        power = poly_mul(&power, &[1.0, -1.0]);
    }
    out
}

/// Schur–Cohn step-down test on `a₀ + a₁z⁻¹ + … + aₙz⁻ⁿ`: every root of
/// `a₀zⁿ + … + aₙ` strictly inside the unit circle.
pub fn schur_stable(den: &[f64]) -> bool {
    let mut a: Vec<f64> = den.to_vec();
    while a.len() > 1 && *a.last().unwrap() == 0.0 {
        a.pop();
    }
    if a.is_empty() || a[0] == 0.0 {
        return false;
    }
    let a0 = a[0];
    for c in a.iter_mut() {
        *c /= a0;
    }
    while a.len() > 1 {
        let m = a.len() - 1;
        let k = a[m];
        if !(k.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m).map(|i| (a[i] - k * a[m - i]) / denom).collect();
        a = next;
    }
    true
}
