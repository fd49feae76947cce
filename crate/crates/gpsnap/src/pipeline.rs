//! The learning experiment: ILC at training positions, GP fit over the
//! learned snap parameters, and a closed-loop comparison of three
//! feedforward variants at test positions.

use std::f64::consts::PI;
use std::path::Path;

use gpsnap_core::gp::{estimate_delta, fit_hyperparameters};
use gpsnap_core::ilc::run_ilc;
use gpsnap_core::lifted::design_lead_controller;
use gpsnap_core::linalg::norm2;
use gpsnap_core::plant::build_free_free_beam;
use gpsnap_core::trajectory::plan_fourth_order;
use gpsnap_core::{
    BasisSet, ClosedLoop, Controller, GpModel, IlcSession, ModalPlant, SchedulingPosition,
    TrainingSet, Trajectory,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::AppError;
use crate::io::{self, fmt_f64, TrainingRow};

/// Plant, controller and reference shared by every command.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub plant: ModalPlant,
    pub controller: Controller,
    /// Planned move followed by the settle period.
    pub traj: Trajectory,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, AppError> {
        cfg.validate()?;
        let plant = build_free_free_beam(&cfg.beam.to_core())?;
        let nominal = plant.freeze(SchedulingPosition(cfg.controller.nominal_position))?;
        let controller = design_lead_controller(&nominal, cfg.controller.bandwidth_hz)?;
        let traj = plan_fourth_order(&cfg.motion.bounds(), cfg.beam.ts)?
            .extended_at_rest(cfg.settle_samples());
        Ok(Self {
            cfg: cfg.clone(),
            plant,
            controller,
            traj,
        })
    }

    pub fn nominal(&self) -> SchedulingPosition {
        SchedulingPosition(self.cfg.controller.nominal_position)
    }

    /// ILC at `rho` with the learning model frozen at the nominal position.
    pub fn learn(&self, rho: f64, basis: BasisSet) -> Result<IlcSession, AppError> {
        run_ilc(
            &self.plant,
            SchedulingPosition(rho),
            self.nominal(),
            &self.controller,
            &self.traj,
            &self.cfg.ilc.weights(),
            self.cfg.ilc.trials,
            basis,
        )
        .map_err(|source| AppError::AtPosition {
            position: rho,
            source,
        })
    }
}

/// Parameters after the final update: `[m̂, δ]`.
pub fn learned_row(rho: f64, s: &IlcSession) -> TrainingRow {
    let t = s.theta();
    TrainingRow {
        rho,
        mass: t[0],
        delta: t.get(1).copied().unwrap_or(0.0),
    }
}

fn first_error<T>(results: Vec<Result<T, AppError>>) -> Result<Vec<T>, AppError> {
    results.into_iter().collect()
}

pub fn ilc_file_name(rho: f64) -> String {
    format!("ilc_{:.1}mm.csv", rho * 1000.0)
}

pub fn cmd_plan(setup: &Setup, out: &Path) -> Result<Trajectory, AppError> {
    io::write_trajectory(&out.join("trajectory.csv"), &setup.traj)?;
    Ok(setup.traj.clone())
}

#[derive(Debug, Clone)]
pub struct TrainingArtifact {
    pub rows: Vec<TrainingRow>,
    pub sessions: Vec<IlcSession>,
}

/// Learns `[m̂, δ]` at every training position, concurrently.
pub fn cmd_train(setup: &Setup, out: &Path) -> Result<TrainingArtifact, AppError> {
    let positions = &setup.cfg.experiment.training_positions;
    let sessions = first_error(
        positions
            .par_iter()
            .map(|&rho| setup.learn(rho, BasisSet::AccelerationSnap))
            .collect(),
    )?;
    let rows: Vec<TrainingRow> = positions
        .iter()
        .zip(&sessions)
        .map(|(&r, s)| learned_row(r, s))
        .collect();
    for (&rho, s) in positions.iter().zip(&sessions) {
        io::write_ilc_history(&out.join(ilc_file_name(rho)), s)?;
    }
    io::write_training(&out.join("training.csv"), &rows)?;
    Ok(TrainingArtifact { rows, sessions })
}

pub fn training_set(rows: &[TrainingRow]) -> Result<TrainingSet, AppError> {
    let p: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    Ok(TrainingSet::scalar(&p, &y)?)
}

/// Fits the GP to the learned snap parameters, saves it and exports the
/// posterior over the whole beam.
pub fn cmd_fit(setup: &Setup, rows: &[TrainingRow], out: &Path) -> Result<GpModel, AppError> {
    if rows.len() < 2 {
        return Err(AppError::Config(format!(
            "GP fitting needs at least 2 training positions, got {}",
            rows.len()
        )));
    }
    let train = training_set(rows)?;
    let hyp = fit_hyperparameters(&train, &setup.cfg.gp.strategy())?;
    let model = GpModel::new(hyp, train)?;
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    io::save_model(&out.join("gp_model.json"), &model)?;
    let n = setup.cfg.experiment.posterior_points.max(2);
    let len = setup.plant.length;
    let grid: Vec<f64> = (0..n).map(|i| len * i as f64 / (n - 1) as f64).collect();
    let post = model.posterior(&grid)?;
    io::write_posterior(
        &out.join("posterior.csv"),
        &grid,
        &post.mean,
        &post.variance(),
    )?;
    Ok(model)
}

/// The three feedforward variants, in report order.
pub const VARIANTS: [&str; 3] = ["gp", "pi", "acc"];

#[derive(Debug, Clone, PartialEq)]
pub struct PositionResult {
    pub delta_gp: f64,
    /// `‖e‖₂` for GP snap, position-independent snap, acceleration only.
    pub norm_e: [f64; 3],
    pub max_abs_e: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub rho: f64,
    pub in_hull: bool,
    /// Failure is recorded as `(kind, message)`.
    pub outcome: Result<PositionResult, (String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub mass: f64,
    pub delta_nominal: f64,
    pub entries: Vec<ComparisonEntry>,
    pub trace_rho: f64,
    /// Error traces at `trace_rho`, one per variant.
    pub traces: Option<[Vec<f64>; 3]>,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Closed-loop errors of the three variants at `rho`.
pub fn evaluate_position(
    setup: &Setup,
    model: &GpModel,
    mass: f64,
    delta_nominal: f64,
    rho: f64,
) -> Result<(f64, [Vec<f64>; 3]), AppError> {
    let at = |source| AppError::AtPosition {
        position: rho,
        source,
    };
    let delta_gp = estimate_delta(model, rho).map_err(at)?;
    let frozen = setup.plant.freeze(SchedulingPosition(rho)).map_err(at)?;
    let lp = ClosedLoop::new(&frozen, &setup.controller, setup.traj.len()).map_err(at)?;
    let t = &setup.traj;
    let ff = |delta: f64| -> Vec<f64> {
        t.acc
            .iter()
            .zip(&t.snap)
            .map(|(a, s)| mass * a + delta * s)
            .collect()
    };
    let mut errs = Vec::with_capacity(3);
    for f in [ff(delta_gp), ff(delta_nominal), ff(0.0)] {
        errs.push(lp.error(&t.pos, &f).map_err(at)?);
    }
    let [a, b, c]: [Vec<f64>; 3] = errs.try_into().expect("three variants");
    Ok((delta_gp, [a, b, c]))
}

/// Nominal-position parameters, taken from the training table when the
/// nominal position was trained and learned afresh otherwise.
pub fn nominal_parameters(setup: &Setup, rows: &[TrainingRow]) -> Result<TrainingRow, AppError> {
    let rho0 = setup.cfg.controller.nominal_position;
    match rows.iter().find(|r| (r.rho - rho0).abs() <= 1e-12) {
        Some(r) => Ok(*r),
        None => Ok(learned_row(
            rho0,
            &setup.learn(rho0, BasisSet::AccelerationSnap)?,
        )),
    }
}

pub fn cmd_evaluate(
    setup: &Setup,
    model: &GpModel,
    rows: &[TrainingRow],
    out: &Path,
) -> Result<ComparisonReport, AppError> {
    let nominal = nominal_parameters(setup, rows)?;
    let (mass, delta_nominal) = (nominal.mass, nominal.delta);
    let exp = &setup.cfg.experiment;
    let trace_rho = exp.trace_position;
    let mut positions = exp.test_positions.clone();
    let trace_is_test = positions.contains(&trace_rho);
    if !trace_is_test {
        positions.push(trace_rho);
    }
    let results: Vec<_> = positions
        .par_iter()
        .map(|&rho| evaluate_position(setup, model, mass, delta_nominal, rho))
        .collect();

    let mut traces = None;
    let mut entries = Vec::with_capacity(exp.test_positions.len());
    for (i, (&rho, res)) in positions.iter().zip(results).enumerate() {
        let is_test = i < exp.test_positions.len();
        let outcome = match res {
            Ok((delta_gp, e)) => {
                if rho == trace_rho && traces.is_none() {
                    traces = Some(e.clone());
                }
                Ok(PositionResult {
                    delta_gp,
                    norm_e: [norm2(&e[0]), norm2(&e[1]), norm2(&e[2])],
                    max_abs_e: [max_abs(&e[0]), max_abs(&e[1]), max_abs(&e[2])],
                })
            }
            Err(e) => Err((e.kind().to_string(), e.to_string())),
        };
        if is_test {
            let in_hull = model.training_set().in_hull(&[rho]);
            entries.push(ComparisonEntry {
                rho,
                in_hull,
                outcome,
            });
        }
    }
    let report = ComparisonReport {
        mass,
        delta_nominal,
        entries,
        trace_rho,
        traces,
    };
    write_report(setup, &report, out)?;
    Ok(report)
}

fn write_report(setup: &Setup, report: &ComparisonReport, out: &Path) -> Result<(), AppError> {
    let rows = report
        .entries
        .iter()
        .map(|e| {
            let mut r = vec![fmt_f64(e.rho)];
            match &e.outcome {
                Ok(p) => {
                    r.push(fmt_f64(p.delta_gp));
                    r.extend(p.norm_e.iter().chain(&p.max_abs_e).map(|v| fmt_f64(*v)));
                    r.push(e.in_hull.to_string());
                    r.push("ok".into());
                }
                Err((kind, _)) => {
                    r.extend(std::iter::repeat_n(String::new(), 7));
                    r.push(e.in_hull.to_string());
                    r.push(format!("error:{kind}"));
                }
            }
            r
        })
        .collect();
    io::write_csv(
        &out.join("comparison.csv"),
        &[
            "rho",
            "delta_gp",
            "norm_e_gp",
            "norm_e_pi",
            "norm_e_acc",
            "max_e_gp",
            "max_e_pi",
            "max_e_acc",
            "in_hull",
            "status",
        ],
        rows,
    )?;
    if let Some(tr) = &report.traces {
        let t = &setup.traj;
        let rows = (0..t.len())
            .map(|k| {
                vec![
                    k.to_string(),
                    fmt_f64(t.time(k)),
                    fmt_f64(tr[0][k]),
                    fmt_f64(tr[1][k]),
                    fmt_f64(tr[2][k]),
                ]
            })
            .collect();
        io::write_csv(
            &out.join("error_trace.csv"),
            &["k", "t", "e_gp", "e_pi", "e_acc"],
            rows,
        )?;
    }
    Ok(())
}

/// Log-spaced frequency grid in Hz, below Nyquist.
pub fn bode_grid(ts: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (0.1_f64, 0.45 / ts);
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Frozen frequency responses, rows `(rho, freq_hz, |G|, ∠G°)`.
pub fn cmd_bode(
    setup: &Setup,
    rhos: &[f64],
    out: &Path,
) -> Result<Vec<(f64, f64, f64, f64)>, AppError> {
    let grid = bode_grid(setup.plant.ts, 2000);
    let mut rows = Vec::with_capacity(rhos.len() * grid.len());
    for &rho in rhos {
        let frozen = setup.plant.freeze(SchedulingPosition(rho))?;
        for &f in &grid {
            let g = frozen.frequency_response(2.0 * PI * f)?;
            rows.push((rho, f, g.norm(), g.arg().to_degrees()));
        }
    }
    io::write_bode(&out.join("bode.csv"), &rows)?;
    Ok(rows)
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub training: TrainingArtifact,
    pub model: GpModel,
    pub report: ComparisonReport,
}

/// plan → train → fit → evaluate.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineOutput, AppError> {
    let setup = Setup::new(cfg)?;
    cmd_plan(&setup, out)?;
    let training = cmd_train(&setup, out)?;
    let model = cmd_fit(&setup, &training.rows, out)?;
    let report = cmd_evaluate(&setup, &model, &training.rows, out)?;
    Ok(PipelineOutput {
        training,
        model,
        report,
    })
}
