//! Python bindings: closed-form benchmarks, the networks used by the solver,
//! Langevin sampling and the training loops.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfac_core::actor::{probe_control, GaussianPolicy};
use mfac_core::analytic::{self, AnalyticSolution};
use mfac_core::config::{Problem, RunConfigFile};
use mfac_core::diffnet::AdamState;
use mfac_core::env::{LqConfig, MfcgConfig};
use mfac_core::score::{self, SampleSet, ScoreNet};
use mfac_core::trainer::{self, MetricRow, Mode, Profile, TrainConfig, TrainResult};
use mfac_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonFinite(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    serde_json::from_value(serde_json::Value::String(mode.to_ascii_lowercase()))
        .map_err(|_| PyValueError::new_err(format!("unknown mode '{mode}' (mfg, mfc or mfcg)")))
}

#[pyclass(name = "LqConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyLqConfig(LqConfig);

#[pymethods]
impl PyLqConfig {
    #[new]
    #[pyo3(signature = (c1, c2, c3, c4, c5, sigma, beta = 1.0, dt = 0.01))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        c1: f64,
        c2: f64,
        c3: f64,
        c4: f64,
        c5: f64,
        sigma: f64,
        beta: f64,
        dt: f64,
    ) -> PyResult<Self> {
        let cfg = LqConfig {
            c1,
            c2,
            c3,
            c4,
            c5,
            sigma,
            beta,
            dt,
        };
        cfg.validate().map_err(to_py)?;
        Ok(PyLqConfig(cfg))
    }

    #[staticmethod]
    fn set_1() -> Self {
        PyLqConfig(LqConfig::SET_1)
    }

    #[staticmethod]
    fn set_2() -> Self {
        PyLqConfig(LqConfig::SET_2)
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.0.c1
    }
    #[getter]
    fn c2(&self) -> f64 {
        self.0.c2
    }
    #[getter]
    fn c3(&self) -> f64 {
        self.0.c3
    }
    #[getter]
    fn c4(&self) -> f64 {
        self.0.c4
    }
    #[getter]
    fn c5(&self) -> f64 {
        self.0.c5
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }

    /// `-f(x, m, a) dt`
    fn reward(&self, x: f64, a: f64, m: f64) -> f64 {
        mfac_core::env::lq_reward(&self.0, x, a, m)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "MfcgConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyMfcgConfig(MfcgConfig);

#[pymethods]
impl PyMfcgConfig {
    #[new]
    #[pyo3(signature = (c1, c2, c3, c4, ct1, ct2, ct5, sigma, beta = 1.0, dt = 0.01))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        c1: f64,
        c2: f64,
        c3: f64,
        c4: f64,
        ct1: f64,
        ct2: f64,
        ct5: f64,
        sigma: f64,
        beta: f64,
        dt: f64,
    ) -> PyResult<Self> {
        let cfg = MfcgConfig {
            c1,
            c2,
            c3,
            c4,
            ct1,
            ct2,
            ct5,
            sigma,
            beta,
            dt,
        };
        cfg.validate().map_err(to_py)?;
        Ok(PyMfcgConfig(cfg))
    }

    #[staticmethod]
    fn benchmark() -> Self {
        PyMfcgConfig(MfcgConfig::BENCHMARK)
    }

    fn reward(&self, x: f64, a: f64, m_global: f64, m_local: f64) -> f64 {
        mfac_core::env::mfcg_reward(&self.0, x, a, m_global, m_local)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "AnalyticSolution", frozen)]
struct PyAnalyticSolution(AnalyticSolution);

#[pymethods]
impl PyAnalyticSolution {
    #[getter]
    fn kind(&self) -> String {
        self.0.kind.to_string()
    }
    #[getter]
    fn gamma2(&self) -> f64 {
        self.0.gamma2
    }
    #[getter]
    fn gamma1(&self) -> f64 {
        self.0.gamma1
    }
    #[getter]
    fn gamma0(&self) -> f64 {
        self.0.gamma0
    }
    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean
    }
    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    fn optimal_control(&self, x: f64) -> f64 {
        self.0.optimal_control(x)
    }

    fn value_function(&self, x: f64) -> f64 {
        self.0.value_function(x)
    }

    fn density(&self, x: f64) -> f64 {
        self.0.density(x)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyfunction]
fn solve_mfg(cfg: PyLqConfig) -> PyResult<PyAnalyticSolution> {
    analytic::solve_mfg(&cfg.0)
        .map(PyAnalyticSolution)
        .map_err(to_py)
}

#[pyfunction]
fn solve_mfc(cfg: PyLqConfig) -> PyResult<PyAnalyticSolution> {
    analytic::solve_mfc(&cfg.0)
        .map(PyAnalyticSolution)
        .map_err(to_py)
}

#[pyfunction]
fn solve_mfcg(cfg: PyMfcgConfig) -> PyResult<PyAnalyticSolution> {
    analytic::solve_mfcg(&cfg.0)
        .map(PyAnalyticSolution)
        .map_err(to_py)
}

#[pyfunction]
fn mfg_fixed_point_residual(cfg: PyLqConfig) -> PyResult<f64> {
    analytic::mfg_fixed_point_residual(&cfg.0).map_err(to_py)
}

#[pyfunction]
fn mfc_stationarity_residual(cfg: PyLqConfig) -> PyResult<f64> {
    analytic::mfc_stationarity_residual(&cfg.0).map_err(to_py)
}

#[pyfunction]
fn mfcg_fixed_point_residual(cfg: PyMfcgConfig) -> PyResult<f64> {
    analytic::mfcg_fixed_point_residual(&cfg.0).map_err(to_py)
}

/// Score network with its own Adam state.
#[pyclass(name = "ScoreNet")]
struct PyScoreNet {
    net: ScoreNet,
    adam: AdamState,
}

#[pymethods]
impl PyScoreNet {
    #[new]
    #[pyo3(signature = (seed = 0))]
    fn new(seed: u64) -> Self {
        let net = ScoreNet::init(&mut ChaCha8Rng::seed_from_u64(seed));
        let adam = AdamState::new(net.net.params.len());
        PyScoreNet { net, adam }
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.net.net.params.len()
    }

    fn score(&self, x: f64) -> PyResult<f64> {
        self.net.score(x).map_err(to_py)
    }

    fn loss(&self, x: f64) -> PyResult<f64> {
        self.net.loss(x).map_err(to_py)
    }

    /// One Adam step on the score-matching loss at `x`; returns the loss.
    fn step(&mut self, x: f64, lr: f64) -> PyResult<f64> {
        self.net.step(&mut self.adam, x, lr).map_err(to_py)
    }

    /// Langevin chains started at `particles`.
    #[pyo3(signature = (particles, eps = 0.05, n_iter = 200, seed = 0))]
    fn sample(
        &self,
        particles: Vec<f64>,
        eps: f64,
        n_iter: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let warm = SampleSet::new(particles).map_err(to_py)?;
        let out = score::langevin_with_key(&self.net, &warm, eps, n_iter, seed).map_err(to_py)?;
        Ok(out.particles().to_vec())
    }
}

/// Langevin chains driven by the score of N(mean, variance).
#[pyfunction]
#[pyo3(signature = (mean, variance, particles, eps = 0.05, n_iter = 200, seed = 0))]
fn langevin_gaussian(
    mean: f64,
    variance: f64,
    particles: Vec<f64>,
    eps: f64,
    n_iter: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    if !(variance > 0.0) {
        return Err(PyValueError::new_err("variance must be positive"));
    }
    let warm = SampleSet::new(particles).map_err(to_py)?;
    let out = score::langevin_general(
        |xs, out, _| {
            out.clear();
            out.extend(xs.iter().map(|x| -(x - mean) / variance));
            Ok(())
        },
        &warm,
        eps,
        n_iter,
        seed,
    )
    .map_err(to_py)?;
    Ok(out.particles().to_vec())
}

#[pyclass(name = "GaussianPolicy")]
struct PyGaussianPolicy(GaussianPolicy);

#[pymethods]
impl PyGaussianPolicy {
    #[new]
    #[pyo3(signature = (seed = 0))]
    fn new(seed: u64) -> Self {
        PyGaussianPolicy(GaussianPolicy::init(&mut ChaCha8Rng::seed_from_u64(seed)))
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }

    /// `(mean, std)` of the action distribution at `x`.
    fn policy_params(&self, x: f64) -> PyResult<(f64, f64)> {
        self.0.policy_params(x).map_err(to_py)
    }

    fn log_prob(&self, x: f64, a: f64) -> PyResult<f64> {
        self.0.log_prob(x, a).map_err(to_py)
    }

    fn probe_control(&self, probes: Vec<f64>) -> PyResult<Vec<f64>> {
        probe_control(&self.0, &probes).map_err(to_py)
    }
}

#[pyclass(name = "TrainConfig", from_py_object)]
#[derive(Clone)]
struct PyTrainConfig(TrainConfig);

#[pymethods]
impl PyTrainConfig {
    /// Benchmark learning rates for `mode` with the desk profile.
    #[new]
    #[pyo3(signature = (mode = "mfg"))]
    fn new(mode: &str) -> PyResult<Self> {
        Ok(PyTrainConfig(TrainConfig::benchmark(parse_mode(mode)?)))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg.validate().map_err(to_py)?;
        Ok(PyTrainConfig(cfg))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn apply_profile(&mut self, profile: &str) -> PyResult<()> {
        let p: Profile = profile.parse().map_err(to_py)?;
        self.0.apply_profile(p);
        Ok(())
    }

    fn validate(&self) -> PyResult<()> {
        self.0.validate().map_err(to_py)
    }

    #[getter]
    fn mode(&self) -> String {
        self.0.mode.to_string()
    }
    #[getter]
    fn n_steps(&self) -> u64 {
        self.0.n_steps
    }
    #[setter]
    fn set_n_steps(&mut self, v: u64) {
        self.0.n_steps = v;
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.0.seed = v;
    }
    #[getter]
    fn n_particles(&self) -> usize {
        self.0.n_particles
    }
    #[setter]
    fn set_n_particles(&mut self, v: usize) {
        self.0.n_particles = v;
    }
    #[getter]
    fn langevin_iters(&self) -> usize {
        self.0.langevin_iters
    }
    #[setter]
    fn set_langevin_iters(&mut self, v: usize) {
        self.0.langevin_iters = v;
    }
    #[getter]
    fn log_interval(&self) -> u64 {
        self.0.log_interval
    }
    #[setter]
    fn set_log_interval(&mut self, v: u64) {
        self.0.log_interval = v;
    }
    #[getter]
    fn truncation_steps(&self) -> u64 {
        self.0.truncation_steps
    }
    #[setter]
    fn set_truncation_steps(&mut self, v: u64) {
        self.0.truncation_steps = v;
    }
    #[getter]
    fn lr_actor(&self) -> f64 {
        self.0.lr_actor
    }
    #[setter]
    fn set_lr_actor(&mut self, v: f64) {
        self.0.lr_actor = v;
    }
    #[getter]
    fn lr_critic(&self) -> f64 {
        self.0.lr_critic
    }
    #[setter]
    fn set_lr_critic(&mut self, v: f64) {
        self.0.lr_critic = v;
    }
    #[getter]
    fn lr_score(&self) -> f64 {
        self.0.lr_score
    }
    #[setter]
    fn set_lr_score(&mut self, v: f64) {
        self.0.lr_score = v;
    }
    #[getter]
    fn lr_local_score(&self) -> Option<f64> {
        self.0.lr_local_score
    }
    #[setter]
    fn set_lr_local_score(&mut self, v: Option<f64>) {
        self.0.lr_local_score = v;
    }
    #[getter]
    fn probes(&self) -> Vec<f64> {
        self.0.probes.clone()
    }
    #[setter]
    fn set_probes(&mut self, v: Vec<f64>) {
        self.0.probes = v;
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "TrainResult", frozen)]
struct PyTrainResult(TrainResult);

fn row_dict<'py>(py: Python<'py>, row: &MetricRow, probes: &[f64]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let header = MetricRow::csv_header(probes, row.local.is_some());
    let values = row.csv_record();
    for (k, v) in header.iter().zip(values) {
        let v: f64 = v.parse().unwrap_or(f64::NAN);
        d.set_item(k, v)?;
    }
    d.set_item("step", row.step)?;
    Ok(d)
}

#[pymethods]
impl PyTrainResult {
    #[getter]
    fn status(&self) -> String {
        match &self.0.termination {
            trainer::Termination::Completed => "completed".into(),
            trainer::Termination::Fault { step, message } => {
                format!("fault at step {step}: {message}")
            }
        }
    }

    #[getter]
    fn completed(&self) -> bool {
        self.0.is_completed()
    }

    #[getter]
    fn wall_time_secs(&self) -> f64 {
        self.0.wall_time_secs
    }

    #[getter]
    fn step(&self) -> u64 {
        self.0.state.step
    }

    /// Metric rows as dicts keyed by the metrics.csv column names.
    fn metrics<'py>(&self, py: Python<'py>, probes: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .metrics
            .iter()
            .map(|r| row_dict(py, r, &probes))
            .collect()
    }

    #[getter]
    fn particles(&self) -> Vec<f64> {
        self.0.state.samples.particles().to_vec()
    }

    #[getter]
    fn local_particles(&self) -> Option<Vec<f64>> {
        self.0
            .state
            .local_samples
            .as_ref()
            .map(|s| s.particles().to_vec())
    }

    fn control(&self, probes: Vec<f64>) -> PyResult<Vec<f64>> {
        probe_control(&self.0.state.actor, &probes).map_err(to_py)
    }

    fn value(&self, probes: Vec<f64>) -> PyResult<Vec<f64>> {
        probes
            .iter()
            .map(|&x| self.0.state.critic.value(x))
            .collect::<Result<_, _>>()
            .map_err(to_py)
    }
}

fn run(problem: Problem, cfg: TrainConfig) -> PyResult<PyTrainResult> {
    let env = problem.env().map_err(to_py)?;
    let targets = problem.targets(cfg.mode).map_err(to_py)?;
    let res = if cfg.mode.is_mfcg() {
        trainer::run_ih_mfcg_ac(env.as_ref(), &cfg, targets, &mut ())
    } else {
        trainer::run_ih_mf_ac(env.as_ref(), &cfg, targets, &mut ())
    };
    res.map(PyTrainResult).map_err(to_py)
}

/// Trains on an LQ problem (mfg or mfc mode).
#[pyfunction]
fn train_lq(py: Python<'_>, problem: PyLqConfig, config: PyTrainConfig) -> PyResult<PyTrainResult> {
    py.detach(|| run(Problem::Lq(problem.0), config.0))
}

/// Trains on a control-game problem (mfcg mode).
#[pyfunction]
fn train_mfcg(
    py: Python<'_>,
    problem: PyMfcgConfig,
    config: PyTrainConfig,
) -> PyResult<PyTrainResult> {
    py.detach(|| run(Problem::Mfcg(problem.0), config.0))
}

/// Trains from a run configuration file.
#[pyfunction]
#[pyo3(signature = (path, profile = None, seed = None))]
fn train_config_file(
    py: Python<'_>,
    path: &str,
    profile: Option<&str>,
    seed: Option<u64>,
) -> PyResult<PyTrainResult> {
    let file = RunConfigFile::load(path).map_err(to_py)?;
    let profile = profile
        .map(str::parse::<Profile>)
        .transpose()
        .map_err(to_py)?;
    let mut cfg = file.resolve(profile).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    py.detach(|| run(file.problem, cfg))
}

#[pymodule]
fn mfac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLqConfig>()?;
    m.add_class::<PyMfcgConfig>()?;
    m.add_class::<PyAnalyticSolution>()?;
    m.add_class::<PyScoreNet>()?;
    m.add_class::<PyGaussianPolicy>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(solve_mfg, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mfc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mfcg, m)?)?;
    m.add_function(wrap_pyfunction!(mfg_fixed_point_residual, m)?)?;
    m.add_function(wrap_pyfunction!(mfc_stationarity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(mfcg_fixed_point_residual, m)?)?;
    m.add_function(wrap_pyfunction!(langevin_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(train_lq, m)?)?;
    m.add_function(wrap_pyfunction!(train_mfcg, m)?)?;
    m.add_function(wrap_pyfunction!(train_config_file, m)?)?;
    Ok(())
}
