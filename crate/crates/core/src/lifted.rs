//! Finite-horizon (lifted) LTI algebra and the feedback loop.
//!
//! A causal LTI system acting on length-`N` signals is the `N × N`
//! lower-triangular Toeplitz matrix built from its impulse response. All
//! closed-loop quantities (sensitivity `S = (I + GC)⁻¹`, process sensitivity
//! `GS`, tracking error) are computed in this representation, so learning
//! gains and simulation share a single arithmetic path.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::{poly_add, poly_mul, DiscreteTf};
use crate::plant::FrozenPlant;
use crate::trajectory::Trajectory;

/// Lower-triangular Toeplitz operator given by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLti {
    h: Vec<f64>,
}

impl LiftedLti {
    pub fn new(h: Vec<f64>) -> Self {
        Self { h }
    }

    pub fn identity(n: usize) -> Self {
        let mut h = vec![0.0; n];
        if n > 0 {
            h[0] = 1.0;
        }
        Self { h }
    }

    pub fn from_filter(tf: &DiscreteTf, n: usize) -> Self {
        Self {
            h: tf.impulse_response(n),
        }
    }

    pub fn from_plant(plant: &FrozenPlant, n: usize) -> Self {
        Self {
            h: plant.impulse_response(n),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn impulse_response(&self) -> &[f64] {
        &self.h
    }

    /// Matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.h[i - j]
        }
    }

    /// `y = H u` (causal convolution truncated to `N`).
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.h.len() {
            return Err(Error::LengthMismatch {
                expected: self.h.len(),
                got: u.len(),
            });
        }
        Ok(convolve_truncated(&self.h, u))
    }

    /// `self · other`.
    pub fn compose(&self, other: &LiftedLti) -> Result<LiftedLti> {
        Ok(LiftedLti {
            h: self.apply(&other.h)?,
        })
    }

    pub fn add(&self, other: &LiftedLti) -> Result<LiftedLti> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(LiftedLti {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a + b).collect(),
        })
    }

    /// Inverse by forward substitution; requires a nonzero diagonal.
    pub fn inverse(&self) -> Result<LiftedLti> {
        let n = self.h.len();
        if n == 0 {
            return Ok(self.clone());
        }
        let a0 = self.h[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::InvalidInput(
                "lifted operator has a zero diagonal".into(),
            ));
        }
        let mut s = vec![0.0; n];
        s[0] = 1.0 / a0;
        for k in 1..n {
            let acc: f64 = self.h[1..=k]
                .iter()
                .zip(s[..k].iter().rev())
                .map(|(a, b)| a * b)
                .sum();
            s[k] = -acc / a0;
        }
        Ok(LiftedLti { h: s })
    }
}

pub(crate) fn convolve_truncated(h: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len().min(h.len());
    (0..n)
        .map(|k| {
            h[..=k]
                .iter()
                .zip(u[..=k].iter().rev())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Fixed feedback controller: a gain in series with a first-order lead.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub gain: f64,
    pub lead: DiscreteTf,
    pub ts: f64,
}

impl Controller {
    pub fn transfer_function(&self) -> DiscreteTf {
        self.lead.scaled(self.gain)
    }

    pub fn with_gain(&self, gain: f64) -> Controller {
        Controller {
            gain,
            ..self.clone()
        }
    }

    /// Zero-gain controller (open loop, `S = I`).
    pub fn open_loop(ts: f64) -> Controller {
        Controller {
            gain: 0.0,
            lead: DiscreteTf::gain(1.0),
            ts,
        }
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        self.lead.response(omega, self.ts) * self.gain
    }
}

/// Loop gain `C·G` at `omega` rad/s.
pub fn loop_response(plant: &FrozenPlant, c: &Controller, omega: f64) -> Result<Complex64> {
    Ok(plant.frequency_response(omega)? * c.response(omega))
}

/// First frequency (Hz) where `|CG|` falls through 1, scanning upward.
pub fn crossover_hz(plant: &FrozenPlant, c: &Controller) -> Option<f64> {
    let nyquist = PI / plant.ts;
    let (lo, hi) = (1e-3 * 2.0 * PI, 0.999 * nyquist);
    let steps = 4000;
    let ratio = libm::pow(hi / lo, 1.0 / steps as f64);
    let mag = |w: f64| {
        loop_response(plant, c, w)
            .map(|l| l.norm())
            .unwrap_or(f64::NAN)
    };
    let mut w_prev = lo;
    let mut m_prev = mag(lo);
    for _ in 0..steps {
        let w = w_prev * ratio;
        let m = mag(w);
        if m_prev > 1.0 && m <= 1.0 {
            let (mut a, mut b) = (w_prev, w);
            for _ in 0..100 {
                let mid = libm::sqrt(a * b);
                if mag(mid) > 1.0 {
                    a = mid
                } else {
                    b = mid
                }
            }
            return Some(libm::sqrt(a * b) / (2.0 * PI));
        }
        w_prev = w;
        m_prev = m;
    }
    None
}

/// Phase margin in degrees at the first crossover.
pub fn phase_margin_deg(plant: &FrozenPlant, c: &Controller) -> Option<f64> {
    let fc = crossover_hz(plant, c)?;
    let l = loop_response(plant, c, 2.0 * PI * fc).ok()?;
    let mut pm = 180.0 + l.arg().to_degrees();
    while pm > 180.0 {
        pm -= 360.0;
    }
    while pm <= -180.0 {
        pm += 360.0;
    }
    Some(pm)
}

/// Characteristic polynomial `den_G·den_C + num_G·num_C` (in `q⁻¹`).
pub fn characteristic_polynomial(plant: &FrozenPlant, c: &Controller) -> Vec<f64> {
    let g = plant.transfer_function();
    let k = c.transfer_function();
    poly_add(&poly_mul(g.den(), k.den()), &poly_mul(g.num(), k.num()))
}

pub fn is_closed_loop_stable(plant: &FrozenPlant, c: &Controller) -> bool {
    crate::filter::schur_stable(&characteristic_polynomial(plant, c))
}

/// Lead controller (zero at `bw/3`, pole at `3·bw`) with gain solved for
/// unit loop gain at `bandwidth_hz`.
pub fn design_lead_controller(
    plant_nominal: &FrozenPlant,
    bandwidth_hz: f64,
) -> Result<Controller> {
    let ts = plant_nominal.ts;
    if !(bandwidth_hz > 0.0) || bandwidth_hz >= 0.5 / ts {
        return Err(Error::DesignFailure(format!(
            "bandwidth {bandwidth_hz} Hz is out of range"
        )));
    }
    if let Some(w1) = plant_nominal.first_resonance() {
        if 2.0 * PI * bandwidth_hz >= w1 {
            return Err(Error::DesignFailure(format!(
                "bandwidth {bandwidth_hz} Hz is not below the first resonance {:.3} Hz",
                w1 / (2.0 * PI)
            )));
        }
    }
    let wb = 2.0 * PI * bandwidth_hz;
    let (wz, wp) = (wb / 3.0, 3.0 * wb);
    let lead = DiscreteTf::from_continuous(&[1.0, 1.0 / wz], &[1.0, 1.0 / wp], ts)?;
    let unit = Controller {
        gain: 1.0,
        lead,
        ts,
    };
    let l = loop_response(plant_nominal, &unit, wb)?.norm();
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::DesignFailure(
            "loop gain vanishes at the bandwidth".into(),
        ));
    }
    let c = unit.with_gain(1.0 / l);

    let fc = crossover_hz(plant_nominal, &c)
        .ok_or_else(|| Error::DesignFailure("no gain crossover found".into()))?;
    if (fc / bandwidth_hz - 1.0).abs() > 0.02 {
        return Err(Error::DesignFailure(format!(
            "crossover at {fc:.4} Hz, wanted {bandwidth_hz} Hz"
        )));
    }
    let pm = phase_margin_deg(plant_nominal, &c).unwrap_or(f64::NAN);
    if !(pm >= 30.0) {
        return Err(Error::DesignFailure(format!(
            "phase margin {pm:.1} deg below 30 deg"
        )));
    }
    if !is_closed_loop_stable(plant_nominal, &c) {
        return Err(Error::DesignFailure(
            "closed loop with the nominal plant is unstable".into(),
        ));
    }
    Ok(c)
}

/// Lifted operators of the feedback loop with feedforward injected at the
/// plant input: `e = S r − S G f`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    g: LiftedLti,
    s: LiftedLti,
    gs: LiftedLti,
}

impl ClosedLoop {
    pub fn new(plant: &FrozenPlant, c: &Controller, n: usize) -> Result<Self> {
        if !is_closed_loop_stable(plant, c) {
            return Err(Error::Instability(
                "characteristic polynomial has roots outside the unit circle".into(),
            ));
        }
        let g = LiftedLti::from_plant(plant, n);
        let k = LiftedLti::from_filter(&c.transfer_function(), n);
        let s = LiftedLti::identity(n).add(&g.compose(&k)?)?.inverse()?;
        let gs = g.compose(&s)?;
        Ok(Self { g, s, gs })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn plant(&self) -> &LiftedLti {
        &self.g
    }

    pub fn sensitivity(&self) -> &LiftedLti {
        &self.s
    }

    /// Process sensitivity `G S`.
    pub fn process(&self) -> &LiftedLti {
        &self.gs
    }

    /// Tracking error for reference `r` and feedforward `f`.
    pub fn error(&self, r: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != r.len() {
            return Err(Error::LengthMismatch {
                expected: r.len(),
                got: f.len(),
            });
        }
        if f.iter().chain(r).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite reference or feedforward sample".into(),
            ));
        }
        let gf = self.g.apply(f)?;
        let drive: Vec<f64> = r.iter().zip(&gf).map(|(a, b)| a - b).collect();
        let e = self.s.apply(&drive)?;
        let guard = 1e12 * (1.0 + r.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
        if let Some(k) = e.iter().position(|x| !x.is_finite() || x.abs() > guard) {
            return Err(Error::Instability(format!(
                "error exceeded overflow guard at k = {k}"
            )));
        }
        Ok(e)
    }
}

/// One-shot closed-loop error on a planned trajectory.
pub fn closed_loop_error(
    plant: &FrozenPlant,
    c: &Controller,
    traj: &Trajectory,
    f: &[f64],
) -> Result<Vec<f64>> {
    ClosedLoop::new(plant, c, traj.len())?.error(&traj.pos, f)
}

pub fn sensitivity_lifted(plant: &FrozenPlant, c: &Controller, n: usize) -> Result<LiftedLti> {
    Ok(ClosedLoop::new(plant, c, n)?.s)
}

pub fn process_lifted(plant: &FrozenPlant, c: &Controller, n: usize) -> Result<LiftedLti> {
    Ok(ClosedLoop::new(plant, c, n)?.gs)
}
