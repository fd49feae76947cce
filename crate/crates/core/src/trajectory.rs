//! Rest-to-rest fourth-order (snap-limited) point-to-point references.
//!
//! The snap signal is a symmetric pattern of eight pulses
//! `{+d, −d, −d, +d, −d, +d, +d, −d}` separated by constant-jerk,
//! constant-acceleration and constant-velocity phases. Phase durations are
//! chosen greedily (snap, then jerk, then acceleration, then velocity),
//! rounded up to whole samples, and the snap amplitude is re-solved so the
//! sampled profile lands exactly on the target distance.
//!
//! The stored derivative chain is exact on the grid: every signal is the
//! running sum `x[k] = x[k−1] + T_s·ẋ[k]` of the next-higher derivative. This
//! is the inverse of the backward difference `(1 − q⁻¹)/T_s` used to
//! discretize the plant, so `m·acc` inverts the rigid-body mode exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Slack allowed on bound checks for floating-point rounding.
pub const BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionBounds {
    /// Move distance, m.
    pub distance: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    /// Snap bound, m/s⁴.
    pub d_max: f64,
}

impl MotionBounds {
    /// 100 mm benchmark move, 0.86 s long with a short constant-acceleration
    /// phase.
    pub fn benchmark() -> Self {
        Self {
            distance: 0.1,
            v_max: 0.5,
            a_max: 1.0,
            j_max: 10.0,
            d_max: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance >= 0.0) || !self.distance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "move distance must be non-negative, got {}",
                self.distance
            )));
        }
        for (name, v) in [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("j_max", self.j_max),
            ("d_max", self.d_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Durations of the snap, constant-jerk, constant-acceleration and
/// constant-velocity phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDurations {
    pub snap: f64,
    pub jerk: f64,
    pub acc: f64,
    pub vel: f64,
}

impl PhaseDurations {
    pub fn total(&self) -> f64 {
        8.0 * self.snap + 4.0 * self.jerk + 2.0 * self.acc + self.vel
    }
}

/// Peak values reached by a continuous profile with snap amplitude `d`.
pub fn profile_peaks(p: &PhaseDurations, d: f64) -> [f64; 5] {
    let jerk = d * p.snap;
    let acc = jerk * (p.snap + p.jerk);
    let vel = acc * (2.0 * p.snap + p.jerk + p.acc);
    let dist = vel * (4.0 * p.snap + 2.0 * p.jerk + p.acc + p.vel);
    [dist, vel, acc, jerk, d]
}

/// Continuous-time time-optimal phase durations for `bounds`.
pub fn continuous_phases(bounds: &MotionBounds) -> PhaseDurations {
    let MotionBounds {
        distance: x,
        v_max: v,
        a_max: a,
        j_max: j,
        d_max: d,
    } = *bounds;
    let td = (j / d)
        .min(libm::sqrt(a / d))
        .min(libm::cbrt(v / (2.0 * d)))
        .min(libm::sqrt(libm::sqrt(x / (8.0 * d))));

    let jp = d * td;
    let tj_acc = a / jp - td;
    let tj_vel = 0.5 * (-3.0 * td + libm::sqrt(td * td + 4.0 * v / jp));
    // 2 jp (td + t)(2td + t)^2 = x, monotone in t
    let dist_at = |t: f64| 2.0 * jp * (td + t) * (2.0 * td + t) * (2.0 * td + t);
    let tj_dist = bisect_increasing(dist_at, x, tj_acc.min(tj_vel).max(0.0));
    let tj = tj_acc.min(tj_vel).min(tj_dist).max(0.0);

    let ap = jp * (td + tj);
    let w = 2.0 * td + tj;
    let ta_vel = v / ap - w;
    let ta_dist = 0.5 * (-3.0 * w + libm::sqrt(w * w + 4.0 * x / ap));
    let ta = ta_vel.min(ta_dist).max(0.0);

    let vp = ap * (w + ta);
    let tv = ((x - vp * (2.0 * w + ta)) / vp).max(0.0);
    PhaseDurations {
        snap: td,
        jerk: tj,
        acc: ta,
        vel: tv,
    }
}

/// Largest `t ∈ [0, hi]` with `f(t) ≤ target` for increasing `f`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, hi: f64) -> f64 {
    if f(hi) <= target {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    if f(lo) > target {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Sampled reference with its full derivative chain, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub ts: f64,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub acc: Vec<f64>,
    pub jerk: Vec<f64>,
    pub snap: Vec<f64>,
    /// Sample counts of the snap/jerk/acceleration/velocity phases.
    pub phase_samples: [usize; 4],
}

impl Trajectory {
    /// Integrates a snap signal through the running-sum chain.
    pub fn from_snap(snap: Vec<f64>, ts: f64) -> Self {
        let jerk = running_sum(&snap, ts);
        let acc = running_sum(&jerk, ts);
        let vel = running_sum(&acc, ts);
        let pos = running_sum(&vel, ts);
        Self {
            ts,
            pos,
            vel,
            acc,
            jerk,
            snap,
            phase_samples: [0; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.ts * self.len().saturating_sub(1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.ts * k as f64
    }

    /// Stored derivative of the given order (0 = position … 4 = snap).
    pub fn derivative(&self, order: usize) -> Result<&[f64]> {
        match order {
            0 => Ok(&self.pos),
            1 => Ok(&self.vel),
            2 => Ok(&self.acc),
            3 => Ok(&self.jerk),
            4 => Ok(&self.snap),
            _ => Err(Error::OutOfRange {
                what: "derivative order",
                value: order as f64,
                min: 0.0,
                max: 4.0,
            }),
        }
    }

    /// Appends `samples` samples at rest at the final position.
    pub fn extended_at_rest(&self, samples: usize) -> Trajectory {
        let mut t = self.clone();
        let end = self.pos.last().copied().unwrap_or(0.0);
        t.pos.extend(core::iter::repeat_n(end, samples));
        for sig in [&mut t.vel, &mut t.acc, &mut t.jerk, &mut t.snap] {
            sig.extend(core::iter::repeat_n(0.0, samples));
        }
        t
    }
}

fn running_sum(x: &[f64], ts: f64) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .map(|v| {
            acc += ts * v;
            acc
        })
        .collect()
}

fn snap_pattern(n: [usize; 4]) -> Vec<f64> {
    let [nd, nj, na, nv] = n;
    let pulse = |sign: f64, out: &mut Vec<f64>| {
        out.extend(core::iter::repeat_n(sign, nd));
        out.extend(core::iter::repeat_n(0.0, nj));
        out.extend(core::iter::repeat_n(-sign, nd));
    };
    let mut accel = Vec::new();
    pulse(1.0, &mut accel);
    accel.extend(core::iter::repeat_n(0.0, na));
    pulse(-1.0, &mut accel);

    let mut s = Vec::with_capacity(2 + 2 * accel.len() + nv);
    s.push(0.0);
    s.extend_from_slice(&accel);
    s.extend(core::iter::repeat_n(0.0, nv));
    s.extend(accel.iter().map(|v| -v));
    s.push(0.0);
    s
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Plans the time-optimal (up to sample quantization) rest-to-rest move.
pub fn plan_fourth_order(bounds: &MotionBounds, ts: f64) -> Result<Trajectory> {
    bounds.validate()?;
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sampling time must be positive, got {ts}"
        )));
    }
    if bounds.distance == 0.0 {
        return Ok(Trajectory::from_snap(vec![0.0], ts));
    }

    let p = continuous_phases(bounds);
    let quantize = |t: f64| libm::ceil(t / ts - 1e-9).max(0.0) as usize;
    let mut n = [
        quantize(p.snap).max(1),
        quantize(p.jerk),
        quantize(p.acc),
        quantize(p.vel),
    ];

    loop {
        let pattern = snap_pattern(n);
        let unit = Trajectory::from_snap(pattern.clone(), ts);
        let amplitude = bounds.distance / unit.pos[unit.len() - 1];
        let mut traj =
            Trajectory::from_snap(pattern.into_iter().map(|s| s * amplitude).collect(), ts);
        traj.phase_samples = n;

        let limit = |v: f64, bound: f64| v <= bound * (1.0 + BOUND_RTOL);
        // widen the phase tied to a violated bound; every widening lowers
        // the amplitude, so this terminates
        if !limit(peak(&traj.snap), bounds.d_max) {
            n[0] += 1;
        } else if !limit(peak(&traj.jerk), bounds.j_max) {
            n[1] += 1;
        } else if !limit(peak(&traj.acc), bounds.a_max) {
            n[2] += 1;
        } else if !limit(peak(&traj.vel), bounds.v_max) {
            n[3] += 1;
        } else {
            return Ok(traj);
        }
    }
}
