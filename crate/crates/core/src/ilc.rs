//! Iterative learning control with basis functions.
//!
//! Feedforward is parameterized as `f = Ψθ`. Each trial minimizes
//!
//! ```text
//! V(θ) = ‖e_j − GSΨ(θ − θ_j)‖²_We + ‖Ψθ‖²_Wf + ‖Ψ(θ − θ_j)‖²_Wdf
//! ```
//!
//! whose minimizer is the linear update `θ_{j+1} = L e_j + Q θ_j`. Only the
//! `N × n_θ` product `GSΨ` is ever formed; the normal equations are
//! `n_θ × n_θ`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lifted::{ClosedLoop, Controller, LiftedLti};
use crate::linalg::{dot, norm2, Cholesky};
use crate::plant::{ModalPlant, SchedulingPosition};
use crate::trajectory::Trajectory;

/// Which reference derivatives become feedforward basis signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisSet {
    /// `f = m̂·r̈`
    Acceleration,
    /// `f = m̂·r̈ + δ·r⃜`
    AccelerationSnap,
}

impl BasisSet {
    pub fn orders(self) -> &'static [usize] {
        match self {
            BasisSet::Acceleration => &[2],
            BasisSet::AccelerationSnap => &[2, 4],
        }
    }
}

fn derivative_name(order: usize) -> &'static str {
    match order {
        0 => "position",
        1 => "velocity",
        2 => "acceleration",
        3 => "jerk",
        _ => "snap",
    }
}

/// Column-stored `N × n_θ` basis matrix `Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl BasisMatrix {
    pub fn new(columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.is_empty() || columns.len() != names.len() {
            return Err(Error::InvalidInput(
                "basis needs one name per column and at least one column".into(),
            ));
        }
        let n = columns[0].len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: c.len(),
            });
        }
        Ok(Self { columns, names })
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_params(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// `Ψθ`.
    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        let mut f = vec![0.0; self.rows()];
        for (col, t) in self.columns.iter().zip(theta) {
            for (fk, c) in f.iter_mut().zip(col) {
                *fk += t * c;
            }
        }
        Ok(f)
    }
}

pub fn build_basis(traj: &Trajectory, set: BasisSet) -> BasisMatrix {
    let orders = set.orders();
    let columns = orders
        .iter()
        .map(|&o| {
            traj.derivative(o)
                .expect("basis orders are at most 4")
                .to_vec()
        })
        .collect();
    let names = orders.iter().map(|&o| derivative_name(o).into()).collect();
    BasisMatrix { columns, names }
}

/// A diagonal weighting matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `w·I`
    Scalar(f64),
    /// Per-sample diagonal.
    Diagonal(Vec<f64>),
    /// `rel · ‖GSΨ‖²_F / ‖Ψ‖²_F · I`, which makes the weight dimensionless
    /// relative to the error term.
    ModelScaled(f64),
}

impl Weighting {
    fn resolve(&self, n: usize, model_scale: f64) -> Result<Vec<f64>> {
        let w = match self {
            Weighting::Scalar(w) => vec![*w; n],
            Weighting::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: d.len(),
                    });
                }
                d.clone()
            }
            Weighting::ModelScaled(rel) => vec![rel * model_scale; n],
        };
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlcWeights {
    pub w_e: Weighting,
    pub w_f: Weighting,
    pub w_df: Weighting,
}

impl Default for IlcWeights {
    fn default() -> Self {
        Self {
            w_e: Weighting::Scalar(1.0),
            w_f: Weighting::ModelScaled(1e-8),
            w_df: Weighting::Scalar(0.0),
        }
    }
}

impl IlcWeights {
    /// `W_e = I`, `W_f = W_Δf = 0`.
    pub fn unweighted() -> Self {
        Self {
            w_e: Weighting::Scalar(1.0),
            w_f: Weighting::Scalar(0.0),
            w_df: Weighting::Scalar(0.0),
        }
    }
}

/// Learning and robustness gains of the analytic update.
#[derive(Debug, Clone, PartialEq)]
pub struct IlcGains {
    /// `n_θ` rows of length `N`.
    pub l: Vec<Vec<f64>>,
    /// Row-major `n_θ × n_θ`.
    pub q: Vec<f64>,
    psi: BasisMatrix,
    gs_psi: Vec<Vec<f64>>,
    w_e: Vec<f64>,
    w_f: Vec<f64>,
    w_df: Vec<f64>,
}

impl IlcGains {
    pub fn n_params(&self) -> usize {
        self.psi.n_params()
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.psi
    }

    /// Columns of `GSΨ` for the model the gains were built from.
    pub fn model_response(&self) -> &[Vec<f64>] {
        &self.gs_psi
    }

    /// `θ_{j+1} = L e_j + Q θ_j`.
    pub fn update(&self, e: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let n = self.psi.rows();
        let p = self.n_params();
        if e.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: e.len(),
            });
        }
        if theta.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: theta.len(),
            });
        }
        Ok((0..p)
            .map(|i| dot(&self.l[i], e) + (0..p).map(|k| self.q[i * p + k] * theta[k]).sum::<f64>())
            .collect())
    }

    /// Trial criterion `V(θ)` given the measured `e_j` at `θ_j`, with the
    /// next error predicted through the model.
    pub fn criterion(&self, e_j: &[f64], theta_j: &[f64], theta: &[f64]) -> Result<f64> {
        let p = self.n_params();
        if theta.len() != p || theta_j.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: theta.len().min(theta_j.len()),
            });
        }
        if e_j.len() != self.psi.rows() {
            return Err(Error::LengthMismatch {
                expected: self.psi.rows(),
                got: e_j.len(),
            });
        }
        let step: Vec<f64> = theta.iter().zip(theta_j).map(|(a, b)| a - b).collect();
        let mut v = 0.0;
        for (k, &ek) in e_j.iter().enumerate() {
            let mut e_next = ek;
            let mut f = 0.0;
            let mut df = 0.0;
            for i in 0..p {
                e_next -= self.gs_psi[i][k] * step[i];
                f += self.psi.columns[i][k] * theta[i];
                df += self.psi.columns[i][k] * step[i];
            }
            v += self.w_e[k] * e_next * e_next + self.w_f[k] * f * f + self.w_df[k] * df * df;
        }
        Ok(v)
    }
}

fn frobenius_sq(cols: &[Vec<f64>]) -> f64 {
    cols.iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// Builds `L` and `Q` from the lifted process sensitivity `GS` of the model.
pub fn compute_gains(gs: &LiftedLti, psi: &BasisMatrix, w: &IlcWeights) -> Result<IlcGains> {
    let n = psi.rows();
    if gs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: gs.len(),
        });
    }
    let p = psi.n_params();
    let gs_psi: Vec<Vec<f64>> = psi
        .columns
        .iter()
        .map(|c| gs.apply(c))
        .collect::<Result<_>>()?;
    let psi_norm = frobenius_sq(&psi.columns);
    let model_scale = if psi_norm > 0.0 {
        frobenius_sq(&gs_psi) / psi_norm
    } else {
        0.0
    };
    let w_e = w.w_e.resolve(n, model_scale)?;
    let w_f = w.w_f.resolve(n, model_scale)?;
    let w_df = w.w_df.resolve(n, model_scale)?;
    if w_e.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidConfig("error weight must be positive".into()));
    }

    let weighted = |a: &[f64], b: &[f64], wt: &[f64]| -> f64 {
        a.iter().zip(b).zip(wt).map(|((x, y), w)| x * y * w).sum()
    };
    let w_fdf: Vec<f64> = w_f.iter().zip(&w_df).map(|(a, b)| a + b).collect();
    let mut r = vec![0.0; p * p];
    let mut q_rhs = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            let a = weighted(&gs_psi[i], &gs_psi[k], &w_e);
            r[i * p + k] = a + weighted(&psi.columns[i], &psi.columns[k], &w_fdf);
            q_rhs[i * p + k] = a + weighted(&psi.columns[i], &psi.columns[k], &w_df);
        }
    }

    let rank_err = |j: usize| Error::RankDeficient {
        column: psi.names[j].clone(),
    };
    for j in 0..p {
        if !(r[j * p + j] > 0.0) {
            return Err(rank_err(j));
        }
    }
    let chol = Cholesky::factor(&r, p).map_err(rank_err)?;
    for j in 0..p {
        let piv = chol.l(j, j);
        if piv * piv <= 1e-12 * r[j * p + j] {
            return Err(rank_err(j));
        }
    }

    // L = R⁻¹ (GSΨ)ᵀ W_e, one column of R⁻¹ at a time
    let mut r_inv = vec![0.0; p * p];
    for c in 0..p {
        let mut unit = vec![0.0; p];
        unit[c] = 1.0;
        for (i, v) in chol.solve(&unit).into_iter().enumerate() {
            r_inv[i * p + c] = v;
        }
    }
    let weighted_cols: Vec<Vec<f64>> = gs_psi
        .iter()
        .map(|c| c.iter().zip(&w_e).map(|(x, w)| x * w).collect())
        .collect();
    let l = (0..p)
        .map(|i| {
            let mut row = vec![0.0; n];
            for (k, col) in weighted_cols.iter().enumerate() {
                let a = r_inv[i * p + k];
                for (rk, c) in row.iter_mut().zip(col) {
                    *rk += a * c;
                }
            }
            row
        })
        .collect();
    let mut q = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            q[i * p + k] = (0..p).map(|m| r_inv[i * p + m] * q_rhs[m * p + k]).sum();
        }
    }
    Ok(IlcGains {
        l,
        q,
        psi: psi.clone(),
        gs_psi,
        w_e,
        w_f,
        w_df,
    })
}

/// One trial's record: the parameters used and the resulting norms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub theta: Vec<f64>,
    pub norm_e: f64,
    pub norm_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlcSession {
    gains: IlcGains,
    theta: Vec<f64>,
    history: Vec<TrialRecord>,
}

impl IlcSession {
    /// Starts from `θ₀ = 0`.
    pub fn new(gains: IlcGains) -> Self {
        let theta = vec![0.0; gains.n_params()];
        Self {
            gains,
            theta,
            history: Vec::new(),
        }
    }

    pub fn gains(&self) -> &IlcGains {
        &self.gains
    }

    /// Parameters for the next trial.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    /// Completed trials.
    pub fn trial(&self) -> usize {
        self.history.len()
    }

    pub fn feedforward(&self) -> Vec<f64> {
        self.gains
            .psi
            .apply(&self.theta)
            .expect("theta matches basis")
    }

    /// Parameters learned at the last completed trial (what produced the
    /// final recorded error), or the current parameters before any trial.
    pub fn last_trial_theta(&self) -> &[f64] {
        self.history.last().map_or(&self.theta, |r| &r.theta)
    }
}

/// Records `e_j` for the current parameters and applies the update.
pub fn ilc_step<'a>(session: &'a mut IlcSession, e_j: &[f64]) -> Result<&'a [f64]> {
    if let Some(k) = e_j.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite error sample at k = {k}"
        )));
    }
    let next = session.gains.update(e_j, &session.theta)?;
    let norm_f = norm2(&session.feedforward());
    session.history.push(TrialRecord {
        theta: session.theta.clone(),
        norm_e: norm2(e_j),
        norm_f,
    });
    session.theta = next;
    Ok(&session.theta)
}

/// Runs `trials` learning trials on the plant frozen at `rho`, with gains
/// from the model frozen at `model_rho`.
#[allow(clippy::too_many_arguments)]
pub fn run_ilc(
    plant: &ModalPlant,
    rho: SchedulingPosition,
    model_rho: SchedulingPosition,
    c: &Controller,
    traj: &Trajectory,
    w: &IlcWeights,
    trials: usize,
    basis: BasisSet,
) -> Result<IlcSession> {
    if trials == 0 {
        return Err(Error::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    let n = traj.len();
    let truth = ClosedLoop::new(&plant.freeze(rho)?, c, n)?;
    let model = if model_rho == rho {
        truth.clone()
    } else {
        ClosedLoop::new(&plant.freeze(model_rho)?, c, n)?
    };
    let gains = compute_gains(model.process(), &build_basis(traj, basis), w)?;
    let mut session = IlcSession::new(gains);
    let mut reference = 0.0;
    for j in 1..=trials {
        let e = truth.error(&traj.pos, &session.feedforward())?;
        let theta = ilc_step(&mut session, &e)?;
        let size = norm2(theta);
        if reference == 0.0 {
            reference = size;
        }
        if !size.is_finite() || (reference > 0.0 && size > 1e6 * reference) {
            return Err(Error::Divergence { trial: j });
        }
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_basis(n: usize) -> BasisMatrix {
        BasisMatrix::new(vec![vec![1.0; n]], vec!["ones".into()]).unwrap()
    }

    #[test]
    fn identity_system_takes_the_mean() {
        let n = 8;
        let g = compute_gains(
            &LiftedLti::identity(n),
            &ones_basis(n),
            &IlcWeights::unweighted(),
        )
        .unwrap();
        for v in &g.l[0] {
            assert!((v - 1.0 / n as f64).abs() < 1e-15);
        }
        assert!((g.q[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_basis_is_rank_deficient() {
        let psi = BasisMatrix::new(
            vec![vec![1.0; 4], vec![0.0; 4]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        match compute_gains(&LiftedLti::identity(4), &psi, &IlcWeights::unweighted()) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, "b"),
            other => panic!("{other:?}"),
        }
        let dup = BasisMatrix::new(
            vec![vec![1.0; 4], vec![2.0; 4]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            compute_gains(&LiftedLti::identity(4), &dup, &IlcWeights::unweighted()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn heavy_input_weight_suppresses_learning() {
        let n = 8;
        let w = IlcWeights {
            w_f: Weighting::Scalar(1e12),
            ..IlcWeights::unweighted()
        };
        let g = compute_gains(&LiftedLti::identity(n), &ones_basis(n), &w).unwrap();
        assert!(g.q[0].abs() < 1e-11);
        assert!(g.l[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn step_records_history() {
        let n = 4;
        let g = compute_gains(
            &LiftedLti::identity(n),
            &ones_basis(n),
            &IlcWeights::unweighted(),
        )
        .unwrap();
        let mut s = IlcSession::new(g);
        let t = ilc_step(&mut s, &[1.0, 2.0, 3.0, 4.0]).unwrap().to_vec();
        assert_eq!(t, vec![2.5]);
        assert_eq!(s.trial(), 1);
        assert_eq!(s.history()[0].theta, vec![0.0]);
        assert_eq!(s.history()[0].norm_f, 0.0);
        assert!(ilc_step(&mut s, &[f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(ilc_step(&mut s, &[0.0; 3]).is_err());
        // zero error with Q = 1 leaves θ unchanged
        assert_eq!(ilc_step(&mut s, &[0.0; 4]).unwrap(), &[2.5]);
    }

    #[test]
    fn basis_apply_is_linear_combination() {
        let psi = BasisMatrix::new(
            vec![vec![1.0, 2.0], vec![3.0, -1.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(psi.apply(&[2.0, 0.5]).unwrap(), vec![3.5, 3.5]);
    }
}
