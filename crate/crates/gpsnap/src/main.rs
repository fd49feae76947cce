use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpsnap::config::ExperimentConfig;
use gpsnap::error::AppError;
use gpsnap::io;
use gpsnap::pipeline::{self, Setup};

#[derive(Parser)]
#[command(
    name = "gpsnap",
    version,
    about = "Learn position-dependent snap feedforward for a flexible beam"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); defaults describe the benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated positions, in meters unless `--mm` is given.
    #[arg(long, global = true, value_delimiter = ',')]
    positions: Option<Vec<f64>>,
    /// Read `--positions` in millimeters.
    #[arg(long, global = true)]
    mm: bool,
    /// ILC trials per position.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Seed of the hyperparameter multi-start.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Export the reference trajectory.
    Plan(#[command(flatten)] Common),
    /// Run ILC at the training positions (or `--positions`).
    Train(#[command(flatten)] Common),
    /// Fit the GP to `training.csv` in the output directory.
    Fit(#[command(flatten)] Common),
    /// Compare GP, position-independent and acceleration-only feedforward
    /// at the test positions (or `--positions`).
    Evaluate(#[command(flatten)] Common),
    /// Export frozen frequency responses at the training positions (or
    /// `--positions`).
    Bode(#[command(flatten)] Common),
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    positions: Option<Vec<f64>>,
}

fn context(c: &Common) -> Result<Ctx, AppError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = c.trials {
        cfg.ilc.trials = t;
    }
    if let Some(s) = c.seed {
        cfg.gp.seed = s;
    }
    let scale = if c.mm { 1e-3 } else { 1.0 };
    let positions = c
        .positions
        .as_ref()
        .map(|p| p.iter().map(|x| x * scale).collect());
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok(Ctx {
        cfg,
        out,
        positions,
    })
}

fn mkdir(out: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))
}

fn run(cmd: Command) -> Result<(), AppError> {
    match cmd {
        Command::Plan(c) => {
            let ctx = context(&c)?;
            mkdir(&ctx.out)?;
            let setup = Setup::new(&ctx.cfg)?;
            let t = pipeline::cmd_plan(&setup, &ctx.out)?;
            let p = t.phase_samples;
            println!(
                "samples={} duration_s={} phase_samples={},{},{},{}",
                t.len(),
                t.duration(),
                p[0],
                p[1],
                p[2],
                p[3]
            );
        }
        Command::Train(c) => {
            let mut ctx = context(&c)?;
            if let Some(p) = ctx.positions.take() {
                ctx.cfg.experiment.training_positions = p;
            }
            mkdir(&ctx.out)?;
            let setup = Setup::new(&ctx.cfg)?;
            let art = pipeline::cmd_train(&setup, &ctx.out)?;
            for (r, s) in art.rows.iter().zip(&art.sessions) {
                let last = s.history().last().map_or(f64::NAN, |h| h.norm_e);
                println!(
                    "rho={} delta={} mass={} final_norm_e={}",
                    r.rho, r.delta, r.mass, last
                );
            }
        }
        Command::Fit(c) => {
            let ctx = context(&c)?;
            let setup = Setup::new(&ctx.cfg)?;
            let rows = io::read_training(&ctx.out.join("training.csv"))?;
            let model = pipeline::cmd_fit(&setup, &rows, &ctx.out)?;
            let h = model.hyperparameters();
            println!(
                "sigma_f2={} length_scale={} sigma_n2={} log_marginal_likelihood={}",
                h.sigma_f2,
                h.length_scale,
                h.sigma_n2,
                model.log_marginal_likelihood()
            );
        }
        Command::Evaluate(c) => {
            let mut ctx = context(&c)?;
            if let Some(p) = ctx.positions.take() {
                ctx.cfg.experiment.test_positions = p;
            }
            let setup = Setup::new(&ctx.cfg)?;
            let model = io::load_model(&ctx.out.join("gp_model.json"))?;
            let rows = io::read_training(&ctx.out.join("training.csv"))?;
            let report = pipeline::cmd_evaluate(&setup, &model, &rows, &ctx.out)?;
            for e in &report.entries {
                if !e.in_hull {
                    eprintln!(
                        "warning: rho={} is outside the training span; the GP estimate reverts toward zero there",
                        e.rho
                    );
                }
                match &e.outcome {
                    Ok(p) => println!(
                        "rho={} norm_e_gp={} norm_e_pi={} norm_e_acc={}",
                        e.rho, p.norm_e[0], p.norm_e[1], p.norm_e[2]
                    ),
                    Err((kind, msg)) => {
                        println!("rho={} status=error kind={kind} message={msg}", e.rho)
                    }
                }
            }
        }
        Command::Bode(c) => {
            let ctx = context(&c)?;
            mkdir(&ctx.out)?;
            let setup = Setup::new(&ctx.cfg)?;
            let rhos = ctx
                .positions
                .unwrap_or_else(|| ctx.cfg.experiment.training_positions.clone());
            let rows = pipeline::cmd_bode(&setup, &rhos, &ctx.out)?;
            println!("rows={}", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
