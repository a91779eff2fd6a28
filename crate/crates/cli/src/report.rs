use std::fs::File;
use std::path::Path;

use mfac_core::analytic::AnalyticSolution;
use mfac_core::config::Problem;
use mfac_core::trainer::{MetricRow, TrainConfig, TrainerState};
use serde::Serialize;

use crate::CliError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const HISTOGRAM_FILE: &str = "histogram.json";

/// Appends metric rows and flushes after each one so long runs can be
/// watched.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, probes: &[f64], local: bool) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(MetricRow::csv_header(probes, local))?;
        inner.flush()?;
        Ok(MetricsWriter { inner })
    }

    /// Reopens `path` keeping the header and rows up to `step`.
    pub fn resume(path: &Path, probes: &[f64], local: bool, step: u64) -> Result<Self, CliError> {
        let header = MetricRow::csv_header(probes, local);
        let mut kept = Vec::new();
        if path.exists() {
            let mut rd = csv::Reader::from_path(path)?;
            let found: Vec<String> = rd.headers()?.iter().map(String::from).collect();
            if found != header {
                return Err(CliError::Config(format!(
                    "{} has a different column layout than this run",
                    path.display()
                )));
            }
            for rec in rd.records() {
                let rec = rec?;
                let s: u64 = rec[0]
                    .parse()
                    .map_err(|_| CliError::Other(format!("bad step value '{}'", &rec[0])))?;
                if s <= step {
                    kept.push(rec);
                }
            }
        }
        let mut w = Self::create(path, probes, local)?;
        for rec in &kept {
            w.inner.write_record(rec)?;
        }
        w.inner.flush()?;
        Ok(w)
    }

    pub fn write(&mut self, row: &MetricRow) -> csv::Result<()> {
        self.inner.write_record(row.csv_record())?;
        self.inner.flush()?;
        Ok(())
    }
}

pub struct Trace {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_metrics(path: &Path) -> Result<Trace, CliError> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        rows.push(vals);
    }
    Ok(Trace { header, rows })
}

/// Per-step mean and sample standard deviation of every metric column
/// across seeds. Steps missing from a faulted seed are averaged over the
/// seeds that reached them (`n_seeds` column).
pub fn write_aggregate(path: &Path, traces: &[Trace]) -> Result<(), CliError> {
    let Some(first) = traces.first() else {
        return Ok(());
    };
    if traces.iter().any(|t| t.header != first.header) {
        return Err(CliError::Other("seed traces have different columns".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string(), "n_seeds".to_string()];
    for c in &first.header[1..] {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    w.write_record(&header)?;
    let longest = traces.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    for i in 0..longest {
        let rows: Vec<&Vec<f64>> = traces.iter().filter_map(|t| t.rows.get(i)).collect();
        let step = rows[0][0];
        let mut rec = vec![step.to_string(), rows.len().to_string()];
        for c in 1..first.header.len() {
            let (mean, std) = mean_std(rows.iter().map(|r| r[c]));
            rec.push(mean.to_string());
            rec.push(std.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Serialize)]
pub struct FinalStats {
    pub step: u64,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub abs_mean_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_sample_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_sample_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_abs_mean_error: Option<f64>,
}

/// Everything a plot needs without recomputing closed forms.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    pub mode: String,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
    pub analytic: AnalyticSolution,
    #[serde(rename = "final")]
    pub final_stats: FinalStats,
    pub probes: Vec<f64>,
    pub learned_control: Vec<f64>,
    pub learned_value: Vec<f64>,
    pub analytic_control: Vec<f64>,
    /// Cost value `v(x)`; the critic estimates `-v(x)`.
    pub analytic_value: Vec<f64>,
    pub problem: Problem,
    pub training: TrainConfig,
}

impl Summary {
    pub fn build(
        problem: &Problem,
        training: &TrainConfig,
        sol: &AnalyticSolution,
        state: &TrainerState,
        status: &str,
        fault: Option<String>,
        wall_time_secs: f64,
    ) -> Result<Self, CliError> {
        let m = state.samples.empirical_mean();
        let local_mean = state.local_samples.as_ref().map(|s| s.empirical_mean());
        let probes = training.probes.clone();
        Ok(Summary {
            status: status.into(),
            fault,
            mode: training.mode.to_string(),
            seed: training.seed,
            wall_time_secs,
            analytic_mean: sol.mean,
            analytic_variance: sol.variance,
            analytic: *sol,
            final_stats: FinalStats {
                step: state.step,
                sample_mean: m,
                sample_var: state.samples.empirical_variance(),
                abs_mean_error: (m - sol.mean).abs(),
                local_sample_mean: local_mean,
                local_sample_var: state.local_samples.as_ref().map(|s| s.empirical_variance()),
                local_abs_mean_error: local_mean.map(|l| (l - sol.mean).abs()),
            },
            learned_control: mfac_core::actor::probe_control(&state.actor, &probes)?,
            learned_value: probes
                .iter()
                .map(|&x| state.critic.value(x))
                .collect::<mfac_core::Result<_>>()?,
            analytic_control: probes.iter().map(|&x| sol.optimal_control(x)).collect(),
            analytic_value: probes.iter().map(|&x| sol.value_function(x)).collect(),
            probes,
            problem: problem.clone(),
            training: training.clone(),
        })
    }
}
