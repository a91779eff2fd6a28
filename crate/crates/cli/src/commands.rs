use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mfac_core::analytic::SolutionKind;
use mfac_core::checkpoint::Checkpoint;
use mfac_core::config::{Problem, RunConfigFile};
use mfac_core::env::MeanFieldEnv;
use mfac_core::histogram::Histogram;
use mfac_core::score::langevin_sample;
use mfac_core::trainer::{MetricRow, Mode, StepObserver, TrainConfig, Trainer};
use mfac_core::Error;

use crate::report::{self, MetricsWriter, Summary};
use crate::{AnalyticArgs, ExportHistArgs, TrainArgs, OUTPUT_DIR_ENV};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAULT: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Fault(String),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Fault(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(EXIT_CONFIG),
            CliError::Fault(_) => ExitCode::from(EXIT_FAULT),
            CliError::Other(_) => ExitCode::FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) => CliError::Fault(e.to_string()),
            Error::Config(_) | Error::Degenerate(_) | Error::Dimension { .. } | Error::Json(_) => {
                CliError::Config(e.to_string())
            }
            Error::Io(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// `--out`, then the environment override, then the config's `output`, then
/// `runs/<config stem>`.
fn output_dir(
    flag: Option<&Path>,
    file: Option<&RunConfigFile>,
    config_path: Option<&Path>,
) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    if let Some(p) = file.and_then(|f| f.output.as_ref()) {
        return PathBuf::from(p);
    }
    let stem = config_path
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    PathBuf::from("runs").join(stem)
}

struct Progress<'a> {
    writer: &'a mut MetricsWriter,
    quiet: bool,
    error: Option<csv::Error>,
}

impl StepObserver for Progress<'_> {
    fn on_metrics(&mut self, row: &MetricRow) {
        if self.error.is_none() {
            if let Err(e) = self.writer.write(row) {
                self.error = Some(e);
            }
        }
        if !self.quiet {
            eprintln!(
                "step {:>9}  mean {:+.4}  var {:.4}  |err| {:.4}  td {:.3e}",
                row.step, row.sample_mean, row.sample_var, row.abs_mean_error, row.td_err_avg
            );
        }
    }
}

pub fn train(args: &TrainArgs) -> CliResult<ExitCode> {
    if args.resume.is_some() && args.seeds > 1 {
        return Err(CliError::Config("--resume works on a single seed".into()));
    }
    let file = match &args.config {
        Some(p) => Some(RunConfigFile::load(p)?),
        None => None,
    };
    let out = output_dir(args.out.as_deref(), file.as_ref(), args.config.as_deref());
    fs::create_dir_all(&out)?;

    if let Some(ck_path) = &args.resume {
        let ck = Checkpoint::load(ck_path)?;
        if let Some(f) = &file {
            let mut training = f.resolve(args.profile)?;
            training.seed = args.seed.unwrap_or(training.seed);
            ck.check_matches(&f.problem, &training)?;
        }
        let status = run_one(
            ck.problem.clone(),
            ck.training.clone(),
            Some(ck),
            &out,
            args,
        )?;
        return Ok(status);
    }

    let file =
        file.ok_or_else(|| CliError::Config("--config is required unless resuming".into()))?;
    let base = file.resolve(args.profile)?;
    let first = args.seed.unwrap_or(base.seed);
    if args.seeds == 1 {
        let mut training = base;
        training.seed = first;
        return run_one(file.problem.clone(), training, None, &out, args);
    }

    let mut traces = Vec::new();
    let mut worst = ExitCode::SUCCESS;
    for s in first..first + args.seeds {
        let mut training = base.clone();
        training.seed = s;
        let dir = out.join(format!("seed_{s}"));
        fs::create_dir_all(&dir)?;
        match run_one(file.problem.clone(), training, None, &dir, args) {
            Ok(code) => {
                if code != ExitCode::SUCCESS {
                    worst = code;
                }
            }
            Err(CliError::Fault(m)) => {
                eprintln!("seed {s}: {m}");
                worst = ExitCode::from(EXIT_FAULT);
            }
            Err(e) => return Err(e),
        }
        traces.push(report::read_metrics(&dir.join(report::METRICS_FILE))?);
    }
    report::write_aggregate(&out.join(report::AGGREGATE_FILE), &traces)?;
    Ok(worst)
}

fn run_one(
    problem: Problem,
    training: TrainConfig,
    resume: Option<Checkpoint>,
    out: &Path,
    args: &TrainArgs,
) -> CliResult<ExitCode> {
    let env = problem.env()?;
    let solution = problem.analytic(training.mode)?;
    let targets = problem.targets(training.mode)?;
    let env_ref: &(dyn MeanFieldEnv + Send + Sync) = env.as_ref();
    let metrics_path = out.join(report::METRICS_FILE);
    let (mut trainer, mut writer) = match resume {
        Some(ck) => {
            let step = ck.state.step;
            let t = ck.into_trainer(env_ref)?;
            let w = MetricsWriter::resume(
                &metrics_path,
                &training.probes,
                training.mode.is_mfcg(),
                step,
            )?;
            (t, w)
        }
        None => {
            let t = Trainer::new(env_ref, training.clone(), targets)?;
            let w =
                MetricsWriter::create(&metrics_path, &training.probes, training.mode.is_mfcg())?;
            (t, w)
        }
    };
    let stop = args
        .stop_after
        .unwrap_or(training.n_steps)
        .min(training.n_steps);
    let start = std::time::Instant::now();
    let mut progress = Progress {
        writer: &mut writer,
        quiet: args.quiet,
        error: None,
    };
    let outcome = trainer.run_until(stop, &mut progress);
    if let Some(e) = progress.error.take() {
        return Err(e.into());
    }
    let wall = start.elapsed().as_secs_f64();
    let fault = match outcome {
        Ok(_) => None,
        Err(e) if e.is_fault() => Some(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let state = trainer.state.clone();
    let ck = Checkpoint::new(&problem, &training, targets, state)?;
    ck.save(out.join(report::CHECKPOINT_FILE))?;
    let status = match (&fault, ck.state.step == training.n_steps) {
        (Some(_), _) => "fault",
        (None, true) => "completed",
        (None, false) => "stopped",
    };
    let summary = Summary::build(
        &problem,
        &training,
        &solution,
        &ck.state,
        status,
        fault.clone(),
        wall,
    )?;
    fs::write(
        out.join(report::SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)?,
    )?;
    match fault {
        Some(m) => Err(CliError::Fault(m)),
        None => Ok(ExitCode::SUCCESS),
    }
}

pub fn analytic(args: &AnalyticArgs) -> CliResult<ExitCode> {
    let file = RunConfigFile::load(&args.config)?;
    let mode = match args.kind {
        None => file.training.mode,
        Some(SolutionKind::Mfg) => Mode::Mfg,
        Some(SolutionKind::Mfc) => Mode::Mfc,
        Some(SolutionKind::Mfcg) => Mode::Mfcg,
    };
    let sol = file.problem.analytic(mode)?;
    println!("{}", serde_json::to_string_pretty(&sol)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct HistogramFile {
    step: u64,
    mode: Mode,
    analytic_mean: f64,
    analytic_variance: f64,
    global: Histogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    local: Option<Histogram>,
}

pub fn export_hist(args: &ExportHistArgs) -> CliResult<ExitCode> {
    let [lo, hi] = args.range[..] else {
        return Err(CliError::Config("--range takes exactly two values".into()));
    };
    if !(lo < hi) {
        return Err(CliError::Config(format!("--range {lo} {hi} is empty")));
    }
    if args.bins == 0 {
        return Err(CliError::Config("--bins must be at least 1".into()));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let cfg = &ck.training;
    let sol = ck.problem.analytic(cfg.mode)?;
    let mut rng = ck.state.rng.clone();
    let global = langevin_sample(
        &ck.state.score,
        &ck.state.samples,
        cfg.langevin_eps,
        cfg.langevin_iters,
        &mut rng,
    )?;
    let local = match (&ck.state.local_score, &ck.state.local_samples) {
        (Some(s), Some(set)) => Some(langevin_sample(
            s,
            set,
            cfg.langevin_eps,
            cfg.langevin_iters,
            &mut rng,
        )?),
        _ => None,
    };
    let hist = |particles: &[f64]| -> CliResult<Histogram> {
        Ok(Histogram::new(particles, args.bins, lo, hi)?.with_density(|x| sol.density(x)))
    };
    let file = HistogramFile {
        step: ck.state.step,
        mode: cfg.mode,
        analytic_mean: sol.mean,
        analytic_variance: sol.variance,
        global: hist(global.particles())?,
        local: local.as_ref().map(|s| hist(s.particles())).transpose()?,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(report::HISTOGRAM_FILE)
    });
    fs::write(&out, serde_json::to_string_pretty(&file)?)?;
    Ok(ExitCode::SUCCESS)
}
