//! Experiment configuration, read from a TOML file with `[section]` headers.
//! Every field has a default, so an empty file describes the benchmark.

use std::path::{Path, PathBuf};

use gpsnap_core::{BeamConfig, IlcWeights, MotionBounds, MultiStart, Weighting};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub mass: f64,
    pub length: f64,
    pub first_frequency_hz: f64,
    pub damping: f64,
    pub flex_modes: usize,
    pub ts: f64,
    /// `[position_m, weight]` pairs.
    pub actuators: Vec<[f64; 2]>,
}

impl Default for BeamSection {
    fn default() -> Self {
        let b = BeamConfig::default();
        Self {
            mass: b.mass,
            length: b.length,
            first_frequency_hz: b.first_frequency_hz,
            damping: b.damping,
            flex_modes: b.flex_modes,
            ts: b.ts,
            actuators: b.actuators.iter().map(|&(x, w)| [x, w]).collect(),
        }
    }
}

impl BeamSection {
    pub fn to_core(&self) -> BeamConfig {
        BeamConfig {
            mass: self.mass,
            length: self.length,
            first_frequency_hz: self.first_frequency_hz,
            damping: self.damping,
            flex_modes: self.flex_modes,
            ts: self.ts,
            actuators: self.actuators.iter().map(|a| (a[0], a[1])).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub bandwidth_hz: f64,
    /// Position at which the controller is designed and the learning model
    /// is frozen, m.
    pub nominal_position: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            bandwidth_hz: 4.0,
            nominal_position: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub distance: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    pub d_max: f64,
    /// Rest period appended after the move, s.
    pub settle_time: f64,
}

impl Default for MotionSection {
    fn default() -> Self {
        let m = MotionBounds::benchmark();
        Self {
            distance: m.distance,
            v_max: m.v_max,
            a_max: m.a_max,
            j_max: m.j_max,
            d_max: m.d_max,
            settle_time: 0.5,
        }
    }
}

impl MotionSection {
    pub fn bounds(&self) -> MotionBounds {
        MotionBounds {
            distance: self.distance,
            v_max: self.v_max,
            a_max: self.a_max,
            j_max: self.j_max,
            d_max: self.d_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScaling {
    /// `w_f` and `w_df` multiply `‖GSΨ‖²/‖Ψ‖²`.
    Model,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlcSection {
    pub trials: usize,
    pub w_e: f64,
    pub w_f: f64,
    pub w_df: f64,
    pub scaling: WeightScaling,
}

impl Default for IlcSection {
    fn default() -> Self {
        Self {
            trials: 6,
            w_e: 1.0,
            w_f: 1e-8,
            w_df: 0.0,
            scaling: WeightScaling::Model,
        }
    }
}

impl IlcSection {
    pub fn weights(&self) -> IlcWeights {
        let wrap = |w: f64| match self.scaling {
            WeightScaling::Model => Weighting::ModelScaled(w),
            WeightScaling::Absolute => Weighting::Scalar(w),
        };
        IlcWeights {
            w_e: Weighting::Scalar(self.w_e),
            w_f: wrap(self.w_f),
            w_df: wrap(self.w_df),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub training_positions: Vec<f64>,
    pub test_positions: Vec<f64>,
    /// Test position whose error trace is exported, m.
    pub trace_position: f64,
    /// Number of points in the exported posterior curve.
    pub posterior_points: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            training_positions: vec![0.01, 0.13, 0.25, 0.37, 0.49],
            test_positions: vec![0.03, 0.11, 0.248, 0.387, 0.47],
            trace_position: 0.03,
            posterior_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSection {
    pub starts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for GpSection {
    fn default() -> Self {
        let m = MultiStart::default();
        Self {
            starts: m.starts,
            max_evals: m.max_evals,
            seed: m.seed,
        }
    }
}

impl GpSection {
    pub fn strategy(&self) -> MultiStart {
        MultiStart {
            starts: self.starts,
            max_evals: self.max_evals,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub beam: BeamSection,
    pub controller: ControllerSection,
    pub motion: MotionSection,
    pub ilc: IlcSection,
    pub experiment: ExperimentSection,
    pub gp: GpSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let len = self.beam.length;
        let on_beam = |what: &str, xs: &[f64]| -> Result<(), AppError> {
            match xs.iter().find(|x| !(**x >= 0.0 && **x <= len)) {
                Some(x) => Err(AppError::Config(format!(
                    "{what} position {x} m is outside the beam [0, {len}]"
                ))),
                None => Ok(()),
            }
        };
        on_beam("training", &self.experiment.training_positions)?;
        on_beam("test", &self.experiment.test_positions)?;
        on_beam("nominal", &[self.controller.nominal_position])?;
        if self.experiment.training_positions.is_empty() {
            return Err(AppError::Config("no training positions".into()));
        }
        if self.ilc.trials == 0 {
            return Err(AppError::Config("ilc.trials must be at least 1".into()));
        }
        if self.motion.settle_time.is_nan() || self.motion.settle_time < 0.0 {
            return Err(AppError::Config(
                "motion.settle_time must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Rest samples appended after the move.
    pub fn settle_samples(&self) -> usize {
        (self.motion.settle_time / self.beam.ts).round() as usize
    }
}
