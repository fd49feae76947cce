//! Position-parameterized modal model of a free-free beam.
//!
//! The plant is a sum of one translational rigid-body mode and `n_f`
//! flexible modes,
//!
//! ```text
//! G(ρ, s) = (1/m)/s² + Σᵢ cᵢ(ρ)bᵢ / (s² + 2ζᵢωᵢs + ωᵢ²)
//! ```
//!
//! where `cᵢ(ρ)` is the (normalized) mode shape at the sensor position and
//! `bᵢ` the actuator participation. Mode shapes are normalized so that every
//! modal mass equals the rigid mass; `cᵢ(ρ)bᵢ` then carries units of 1/kg
//! like the rigid gain. Discretization uses the backward difference
//! `s ← (1 − q⁻¹)/T_s`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::DiscreteTf;

/// Sensor position along the beam, meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SchedulingPosition(pub f64);

impl SchedulingPosition {
    pub fn meters(self) -> f64 {
        self.0
    }
}

impl From<f64> for SchedulingPosition {
    fn from(rho: f64) -> Self {
        SchedulingPosition(rho)
    }
}

/// Physical description of the beam benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Total mass, kg.
    pub mass: f64,
    /// Beam length, m.
    pub length: f64,
    /// First flexible eigenfrequency, Hz. Higher modes follow the free-free
    /// eigenvalue ratios.
    pub first_frequency_hz: f64,
    /// Modal damping ratio applied to every flexible mode.
    pub damping: f64,
    /// Number of flexible modes `n_f`.
    pub flex_modes: usize,
    /// Sampling time, s.
    pub ts: f64,
    /// Actuators as `(position m, input weight)`; weights sum to one.
    pub actuators: Vec<(f64, f64)>,
}

impl Default for BeamConfig {
    /// The 500 mm benchmark beam driven by two equal end actuators.
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 0.5,
            first_frequency_hz: 40.0,
            damping: 0.02,
            flex_modes: 2,
            ts: 1.0 / 4000.0,
            actuators: vec![(0.0, 0.5), (0.5, 0.5)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexMode {
    /// Natural frequency, rad/s.
    pub omega: f64,
    pub zeta: f64,
    /// Free-free eigenvalue parameter βᵢ, 1/m.
    pub beta: f64,
    /// Mode-shape constant σᵢ.
    pub sigma_shape: f64,
    /// Normalization applied to the raw eigenfunction.
    pub scale: f64,
    /// `1 − σᵢ`, kept separately to avoid cancellation.
    one_minus_sigma: f64,
}

impl FlexMode {
    /// Raw (unnormalized) eigenfunction `cosh βx + cos βx − σ(sinh βx + sin βx)`.
    fn raw_shape(&self, x: f64) -> f64 {
        let u = self.beta * x;
        // cosh u − σ sinh u = e^{−u} + (1 − σ) sinh u
        libm::exp(-u) + self.one_minus_sigma * libm::sinh(u) + libm::cos(u)
            - self.sigma_shape * libm::sin(u)
    }

    /// Normalized shape at `x` meters, without a range check.
    pub fn shape(&self, x: f64) -> f64 {
        self.scale * self.raw_shape(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalPlant {
    pub mass: f64,
    /// `c_l b_lᵀ = 1/m`.
    pub rigid_gain: f64,
    pub flex_modes: Vec<FlexMode>,
    pub actuator_positions: Vec<(f64, f64)>,
    /// Actuator participation `bᵢ = Σ_a w_a φᵢ(x_a)` per flexible mode.
    pub input_gains: Vec<f64>,
    pub length: f64,
    pub ts: f64,
}

/// Roots of `cos x cosh x = 1` (free-free beam), skipping the rigid root 0.
pub fn free_free_eigenvalue(index: usize) -> f64 {
    assert!(index >= 1, "free-free eigenvalues are 1-based");
    // cos x − 1/cosh x has a single sign change near (i + 1/2)π
    let g = |x: f64| libm::cos(x) - 1.0 / libm::cosh(x);
    let center = (index as f64 + 0.5) * PI;
    let (mut lo, mut hi) = (center - 0.5, center + 0.5);
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "{what} must be positive, got {v}"
        )));
    }
    Ok(())
}

/// Builds the free-free Euler–Bernoulli beam with `cfg.flex_modes` flexible
/// modes.
pub fn build_free_free_beam(cfg: &BeamConfig) -> Result<ModalPlant> {
    check_positive("mass", cfg.mass)?;
    check_positive("length", cfg.length)?;
    check_positive("first flexible frequency", cfg.first_frequency_hz)?;
    check_positive("sampling time", cfg.ts)?;
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "damping must lie in (0, 1), got {}",
            cfg.damping
        )));
    }
    if cfg.actuators.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one actuator is required".into(),
        ));
    }
    let weight_sum: f64 = cfg.actuators.iter().map(|a| a.1).sum();
    if (weight_sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "actuator weights must sum to 1, got {weight_sum}"
        )));
    }
    for &(x, _) in &cfg.actuators {
        if !(0.0..=cfg.length).contains(&x) {
            return Err(Error::InvalidConfig(format!(
                "actuator at {x} m is off the beam"
            )));
        }
    }

    let len = cfg.length;
    let first = free_free_eigenvalue(1);
    let omega1 = 2.0 * PI * cfg.first_frequency_hz;
    let mut modes = Vec::with_capacity(cfg.flex_modes);
    for i in 1..=cfg.flex_modes {
        let bl = free_free_eigenvalue(i);
        let (sh, s, c) = (libm::sinh(bl), libm::sin(bl), libm::cos(bl));
        let sigma = (libm::cosh(bl) - c) / (sh - s);
        let one_minus_sigma = (c - s - libm::exp(-bl)) / (sh - s);
        let ratio = bl / first;
        let mut mode = FlexMode {
            omega: omega1 * ratio * ratio,
            zeta: cfg.damping,
            beta: bl / len,
            sigma_shape: sigma,
            scale: 1.0,
            one_minus_sigma,
        };
        // modal mass = m  <=>  (1/L)∫φ² dx = 1 for a uniform beam
        let mean_square = simpson(
            |x| {
                let v = mode.raw_shape(x);
                v * v
            },
            0.0,
            len,
            4000,
        ) / len;
        mode.scale = 1.0 / libm::sqrt(mean_square);
        modes.push(mode);
    }

    let input_gains = modes
        .iter()
        .map(|m| cfg.actuators.iter().map(|&(x, w)| w * m.shape(x)).sum())
        .collect();

    Ok(ModalPlant {
        mass: cfg.mass,
        rigid_gain: 1.0 / cfg.mass,
        flex_modes: modes,
        actuator_positions: cfg.actuators.clone(),
        input_gains,
        length: len,
        ts: cfg.ts,
    })
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * k as f64);
    }
    s * h / 3.0
}

impl ModalPlant {
    pub fn n_flex(&self) -> usize {
        self.flex_modes.len()
    }

    fn check_position(&self, what: &'static str, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= self.length) {
            return Err(Error::OutOfRange {
                what,
                value: x,
                min: 0.0,
                max: self.length,
            });
        }
        Ok(())
    }

    /// Normalized shape of flexible mode `i` (1-based) at `x` meters.
    pub fn mode_shape(&self, i: usize, x: f64) -> Result<f64> {
        if i == 0 || i > self.n_flex() {
            return Err(Error::OutOfRange {
                what: "mode index",
                value: i as f64,
                min: 1.0,
                max: self.n_flex() as f64,
            });
        }
        self.check_position("position", x)?;
        Ok(self.flex_modes[i - 1].shape(x))
    }

    /// `Dᵢ(ρ) = cᵢ(ρ)bᵢ` for every flexible mode, 1/kg.
    pub fn modal_gains(&self, rho: SchedulingPosition) -> Result<Vec<f64>> {
        self.check_position("scheduling position", rho.0)?;
        Ok(self
            .flex_modes
            .iter()
            .zip(&self.input_gains)
            .map(|(m, b)| m.shape(rho.0) * b / self.mass)
            .collect())
    }

    /// Frozen LTI dynamics at `rho`.
    pub fn freeze(&self, rho: SchedulingPosition) -> Result<FrozenPlant> {
        let gains = self.modal_gains(rho)?;
        let ts = self.ts;
        let mut sections = Vec::with_capacity(1 + gains.len());
        sections.push(Section {
            kind: SectionKind::Rigid,
            tf: DiscreteTf::new(vec![self.rigid_gain * ts * ts], vec![1.0, -2.0, 1.0])?,
        });
        for (mode, d) in self.flex_modes.iter().zip(gains) {
            let w = mode.omega;
            let tf = DiscreteTf::from_continuous(&[d], &[w * w, 2.0 * mode.zeta * w, 1.0], ts)?;
            sections.push(Section {
                kind: SectionKind::Flexible {
                    omega: w,
                    zeta: mode.zeta,
                },
                tf,
            });
        }
        Ok(FrozenPlant { sections, ts })
    }

    /// Low-frequency limit of `e/r̈` under perfect acceleration feedforward,
    /// `−m Σ cᵢ(ρ)bᵢ/ωᵢ²`, in m/(m/s²).
    pub fn compliance(&self, rho: SchedulingPosition) -> Result<f64> {
        let gains = self.modal_gains(rho)?;
        Ok(-self.mass
            * self
                .flex_modes
                .iter()
                .zip(gains)
                .map(|(m, d)| d / (m.omega * m.omega))
                .sum::<f64>())
    }

    /// Snap feedforward parameter that cancels the compliance,
    /// `δ(ρ) = −m² Σ cᵢ(ρ)bᵢ/ωᵢ²`, in kg·s².
    pub fn analytic_snap(&self, rho: SchedulingPosition) -> Result<f64> {
        Ok(self.mass * self.compliance(rho)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionKind {
    Rigid,
    Flexible { omega: f64, zeta: f64 },
}

/// One additive second-order term of a frozen plant.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    pub tf: DiscreteTf,
}

/// LTI plant obtained by fixing the scheduling position.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPlant {
    pub sections: Vec<Section>,
    pub ts: f64,
}

impl FrozenPlant {
    /// `G(e^{jωT_s})`, `0 < ω < π/T_s`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let nyquist = PI / self.ts;
        if !(omega > 0.0 && omega < nyquist) {
            return Err(Error::OutOfRange {
                what: "frequency",
                value: omega,
                min: 0.0,
                max: nyquist,
            });
        }
        Ok(self
            .sections
            .iter()
            .map(|s| s.tf.response(omega, self.ts))
            .sum())
    }

    /// Output for input `u` from zero initial conditions.
    pub fn simulate(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.is_empty() {
            return Err(Error::InvalidInput("empty input signal".into()));
        }
        if let Some(k) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite input sample at k = {k}"
            )));
        }
        let mut y = vec![0.0; u.len()];
        for s in &self.sections {
            for (yk, sk) in y.iter_mut().zip(s.tf.filter(u)) {
                *yk += sk;
            }
        }
        Ok(y)
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for s in &self.sections {
            for (yk, sk) in y.iter_mut().zip(s.tf.impulse_response(n)) {
                *yk += sk;
            }
        }
        y
    }

    /// All sections combined into a single rational filter.
    pub fn transfer_function(&self) -> DiscreteTf {
        let mut it = self.sections.iter();
        let first = it
            .next()
            .expect("frozen plant has a rigid section")
            .tf
            .clone();
        it.fold(first, |acc, s| acc.parallel(&s.tf))
    }

    /// Lowest flexible natural frequency, rad/s.
    pub fn first_resonance(&self) -> Option<f64> {
        self.sections
            .iter()
            .filter_map(|s| match s.kind {
                SectionKind::Flexible { omega, .. } => Some(omega),
                SectionKind::Rigid => None,
            })
            .fold(None, |acc: Option<f64>, w| {
                Some(acc.map_or(w, |a| a.min(w)))
            })
    }
}
