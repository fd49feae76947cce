//! CSV exports and the persisted GP model document.
//!
//! Floats are written with 17 significant digits so that files from two
//! runs compare byte for byte.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use gpsnap_core::{GpModel, Hyperparameters, IlcSession, TrainingSet, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>, AppError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| AppError::io(path, e))
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), AppError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<(), AppError> {
    write_rows(
        path,
        &["k", "t", "pos", "vel", "acc", "jerk", "snap"],
        (0..t.len()).map(|k| {
            let mut r = vec![k.to_string(), fmt_f64(t.time(k))];
            r.extend([t.pos[k], t.vel[k], t.acc[k], t.jerk[k], t.snap[k]].map(fmt_f64));
            r
        }),
    )
}

/// `trial,norm_e,norm_f,theta_acc,theta_snap`; trials are 1-based and
/// `theta_snap` is empty for an acceleration-only session.
pub fn write_ilc_history(path: &Path, s: &IlcSession) -> Result<(), AppError> {
    write_rows(
        path,
        &["trial", "norm_e", "norm_f", "theta_acc", "theta_snap"],
        s.history().iter().enumerate().map(|(j, r)| {
            vec![
                (j + 1).to_string(),
                fmt_f64(r.norm_e),
                fmt_f64(r.norm_f),
                fmt_f64(r.theta[0]),
                r.theta.get(1).map(|v| fmt_f64(*v)).unwrap_or_default(),
            ]
        }),
    )
}

/// One learned parameter pair per training position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRow {
    pub rho: f64,
    pub delta: f64,
    pub mass: f64,
}

pub fn write_training(path: &Path, rows: &[TrainingRow]) -> Result<(), AppError> {
    write_rows(
        path,
        &["rho", "delta", "mass"],
        rows.iter()
            .map(|r| vec![fmt_f64(r.rho), fmt_f64(r.delta), fmt_f64(r.mass)]),
    )
}

pub fn read_training(path: &Path) -> Result<Vec<TrainingRow>, AppError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<f64, AppError> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    AppError::Parse(format!(
                        "{}: bad value in row {}, column {}",
                        path.display(),
                        i + 1,
                        c + 1
                    ))
                })
        };
        out.push(TrainingRow {
            rho: field(0)?,
            delta: field(1)?,
            mass: field(2)?,
        });
    }
    Ok(out)
}

pub fn write_posterior(
    path: &Path,
    rho: &[f64],
    mean: &[f64],
    var: &[f64],
) -> Result<(), AppError> {
    write_rows(
        path,
        &["rho", "mean", "var"],
        (0..rho.len()).map(|i| vec![fmt_f64(rho[i]), fmt_f64(mean[i]), fmt_f64(var[i])]),
    )
}

pub fn write_bode(path: &Path, rows: &[(f64, f64, f64, f64)]) -> Result<(), AppError> {
    write_rows(
        path,
        &["rho", "freq_hz", "magnitude", "phase_deg"],
        rows.iter()
            .map(|r| vec![fmt_f64(r.0), fmt_f64(r.1), fmt_f64(r.2), fmt_f64(r.3)]),
    )
}

pub fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), AppError> {
    write_rows(path, header, rows)
}

pub const MODEL_FORMAT: &str = "gpsnap-gp-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HyperDoc {
    sigma_f2: f64,
    length_scale: f64,
    sigma_n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    kernel: String,
    mean_function: String,
    hyperparameters: HyperDoc,
    input_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

pub fn model_to_json(model: &GpModel) -> String {
    let h = model.hyperparameters();
    let t = model.training_set();
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kernel: "squared-exponential".into(),
        mean_function: "zero".into(),
        hyperparameters: HyperDoc {
            sigma_f2: h.sigma_f2,
            length_scale: h.length_scale,
            sigma_n2: h.sigma_n2,
        },
        input_dim: t.dim(),
        inputs: t.inputs().to_vec(),
        targets: t.targets().to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("model document is serializable") + "\n"
}

pub fn model_from_json(text: &str) -> Result<GpModel, AppError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| AppError::Parse(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(AppError::Parse(format!(
            "not a GP model document (format `{}`)",
            doc.format
        )));
    }
    if doc.version != MODEL_VERSION {
        return Err(AppError::Parse(format!(
            "unsupported model version {}",
            doc.version
        )));
    }
    let h = doc.hyperparameters;
    let hyp = Hyperparameters {
        sigma_f2: h.sigma_f2,
        length_scale: h.length_scale,
        sigma_n2: h.sigma_n2,
    };
    let train = TrainingSet::new(doc.input_dim, doc.inputs, doc.targets)?;
    Ok(GpModel::new(hyp, train)?)
}

pub fn save_model(path: &Path, model: &GpModel) -> Result<(), AppError> {
    let mut f = File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(model_to_json(model).as_bytes())
        .map_err(|e| AppError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<GpModel, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    model_from_json(&text)
}
