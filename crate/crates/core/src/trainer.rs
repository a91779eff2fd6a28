//! Online actor-critic loops with a score-based mean field.
//!
//! One iteration of [`run_ih_mf_ac`] performs, in order: score-matching
//! update at the current state, Langevin regeneration of the particles from
//! the previous step's particles, action sampling, reward, transition (with
//! warm-up truncation), TD error, critic update and actor update.
//! [`run_ih_mfcg_ac`] adds a local score and a local particle set, each
//! updated right after its global counterpart.
//!
//! Random draws come from a single ChaCha8 stream in the fixed order
//! Langevin key (global, then local), action noise, dynamics noise.
//!
//! Which mean-field solution the loop approximates is selected only by the
//! learning rates; see [`TrainConfig::validate`].

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor::{probe_control, GaussianPolicy};
use crate::critic::{td_error, td_target, CriticNet};
use crate::diffnet::AdamState;
use crate::env::{truncate_state, MeanField, MeanFieldEnv};
use crate::error::{Error, Result};
use crate::score::{langevin_sample, SampleSet, ScoreNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mfg,
    Mfc,
    Mfcg,
}

impl Mode {
    pub fn is_mfcg(self) -> bool {
        self == Mode::Mfcg
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Mfg => "mfg",
            Mode::Mfc => "mfc",
            Mode::Mfcg => "mfcg",
        })
    }
}

/// Named step-count/particle presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected desk or paper)"
            ))),
        }
    }
}

pub fn default_probes() -> Vec<f64> {
    (0..13).map(|i| -1.0 + 0.25 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub n_steps: u64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_local_score: Option<f64>,
    pub langevin_eps: f64,
    pub langevin_iters: usize,
    pub n_particles: usize,
    pub truncation_bound: f64,
    pub truncation_steps: u64,
    pub seed: u64,
    pub log_interval: u64,
    pub initial_state_mean: f64,
    pub initial_state_std: f64,
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
}

impl TrainConfig {
    /// Learning rates of the benchmark runs, with the desk profile applied.
    pub fn benchmark(mode: Mode) -> Self {
        let (lr_score, lr_local_score) = match mode {
            Mode::Mfg => (1e-6, None),
            Mode::Mfc => (5e-4, None),
            Mode::Mfcg => (1e-6, Some(5e-4)),
        };
        let mut cfg = TrainConfig {
            mode,
            n_steps: 0,
            lr_actor: 5e-6,
            lr_critic: 1e-5,
            lr_score,
            lr_local_score,
            langevin_eps: 0.05,
            langevin_iters: 0,
            n_particles: 0,
            truncation_bound: 5.0,
            truncation_steps: 0,
            seed: 0,
            log_interval: 1000,
            initial_state_mean: 0.0,
            initial_state_std: 1.0,
            probes: default_probes(),
        };
        cfg.apply_profile(Profile::Desk);
        cfg
    }

    /// Overwrites step count, particle count, Langevin iterations and the
    /// truncation window with the preset values.
    pub fn apply_profile(&mut self, profile: Profile) {
        let long = if self.mode.is_mfcg() { 2 } else { 1 };
        let (n, k, iters) = match profile {
            Profile::Desk => (200_000 * long, 100, 50),
            Profile::Paper => (1_000_000 * long, 1000, 200),
        };
        self.n_steps = n;
        self.n_particles = k;
        self.langevin_iters = iters;
        self.truncation_steps = n / 5;
    }

    /// Checks ranges and the learning-rate ordering of the selected mode:
    ///
    /// * MFG: `lr_score < min(lr_actor, lr_critic)`
    /// * MFC: `lr_score > max(lr_actor, lr_critic)`
    /// * MFCG: `lr_score < min(lr_actor, lr_critic) <= max(lr_actor, lr_critic) < lr_local_score`
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("lr_actor", self.lr_actor)?;
        positive("lr_critic", self.lr_critic)?;
        positive("lr_score", self.lr_score)?;
        positive("langevin_eps", self.langevin_eps)?;
        positive("truncation_bound", self.truncation_bound)?;
        positive("initial_state_std", self.initial_state_std)?;
        if !self.initial_state_mean.is_finite() {
            return Err(Error::Config("initial_state_mean must be finite".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be at least 1".into()));
        }
        if self.log_interval == 0 {
            return Err(Error::Config("log_interval must be at least 1".into()));
        }
        if self.probes.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("probe states must be finite".into()));
        }
        let lo = self.lr_actor.min(self.lr_critic);
        let hi = self.lr_actor.max(self.lr_critic);
        match self.mode {
            Mode::Mfg => {
                if self.lr_local_score.is_some() {
                    return Err(Error::Config(
                        "lr_local_score is only used in mfcg mode".into(),
                    ));
                }
                if !(self.lr_score < lo) {
                    return Err(Error::Config(format!(
                        "mfg mode requires lr_score < min(lr_actor, lr_critic); got lr_score={} \
                         with lr_actor={} and lr_critic={}",
                        self.lr_score, self.lr_actor, self.lr_critic
                    )));
                }
            }
            Mode::Mfc => {
                if self.lr_local_score.is_some() {
                    return Err(Error::Config(
                        "lr_local_score is only used in mfcg mode".into(),
                    ));
                }
                if !(self.lr_score > hi) {
                    return Err(Error::Config(format!(
                        "mfc mode requires lr_score > max(lr_actor, lr_critic); got lr_score={} \
                         with lr_actor={} and lr_critic={}",
                        self.lr_score, self.lr_actor, self.lr_critic
                    )));
                }
            }
            Mode::Mfcg => {
                let local = self
                    .lr_local_score
                    .ok_or_else(|| Error::Config("mfcg mode requires lr_local_score".into()))?;
                positive("lr_local_score", local)?;
                if !(self.lr_score < lo && hi < local) {
                    return Err(Error::Config(format!(
                        "mfcg mode requires lr_score < min(lr_actor, lr_critic) <= \
                         max(lr_actor, lr_critic) < lr_local_score; got lr_score={}, lr_actor={}, \
                         lr_critic={}, lr_local_score={local}",
                        self.lr_score, self.lr_actor, self.lr_critic
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn metric_rows_expected(&self) -> u64 {
        self.n_steps.div_ceil(self.log_interval)
    }
}

/// Analytic means the metric trace is compared against. The trainer itself
/// never looks inside the environment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanTargets {
    pub global: Option<f64>,
    pub local: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMetrics {
    pub sample_mean: f64,
    pub sample_var: f64,
    pub abs_mean_error: f64,
    pub score_loss_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub sample_mean: f64,
    pub sample_var: f64,
    /// `|sample_mean - target|`, NaN without a target.
    pub abs_mean_error: f64,
    /// Mean of `|delta|` over the logging window.
    pub td_err_avg: f64,
    pub score_loss_avg: f64,
    /// Actor mean head at each probe state.
    pub control: Vec<f64>,
    /// Critic at each probe state.
    pub value: Vec<f64>,
    pub local: Option<LocalMetrics>,
}

impl MetricRow {
    pub fn csv_header(probes: &[f64], local: bool) -> Vec<String> {
        let mut h: Vec<String> = [
            "step",
            "sample_mean",
            "sample_var",
            "abs_mean_error",
            "td_err_avg",
            "score_loss_avg",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(probes.iter().map(|p| format!("control_{p}")));
        h.extend(probes.iter().map(|p| format!("value_{p}")));
        if local {
            h.extend(
                [
                    "local_sample_mean",
                    "local_sample_var",
                    "local_abs_mean_error",
                    "local_score_loss_avg",
                ]
                .iter()
                .map(|s| s.to_string()),
            );
        }
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![
            self.step.to_string(),
            self.sample_mean.to_string(),
            self.sample_var.to_string(),
            self.abs_mean_error.to_string(),
            self.td_err_avg.to_string(),
            self.score_loss_avg.to_string(),
        ];
        r.extend(self.control.iter().map(f64::to_string));
        r.extend(self.value.iter().map(f64::to_string));
        if let Some(l) = &self.local {
            r.extend(
                [
                    l.sample_mean,
                    l.sample_var,
                    l.abs_mean_error,
                    l.score_loss_avg,
                ]
                .iter()
                .map(f64::to_string),
            );
        }
        r
    }
}

/// Stages of one training iteration, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    ScoreUpdate,
    LocalScoreUpdate,
    Sampling,
    LocalSampling,
    Action,
    Reward,
    Transition,
    TdError,
    CriticUpdate,
    ActorUpdate,
}

/// Instrumentation hook called as the loop advances.
pub trait StepObserver {
    fn on_phase(&mut self, _step: u64, _phase: Phase) {}

    /// The state stored for the next iteration, after any truncation.
    fn on_state(&mut self, _step: u64, _x: f64) {}

    fn on_metrics(&mut self, _row: &MetricRow) {}
}

impl StepObserver for () {}

/// Running sums over the current logging window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub td_abs: f64,
    pub score_loss: f64,
    pub local_score_loss: f64,
    pub count: u64,
}

/// Complete loop state; serializing it is enough to resume bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub step: u64,
    pub state: f64,
    pub actor: GaussianPolicy,
    pub critic: CriticNet,
    pub score: ScoreNet,
    pub local_score: Option<ScoreNet>,
    pub adam_actor: AdamState,
    pub adam_critic: AdamState,
    pub adam_score: AdamState,
    pub adam_local_score: Option<AdamState>,
    pub samples: SampleSet,
    pub local_samples: Option<SampleSet>,
    pub rng: ChaCha8Rng,
    pub window: Window,
}

impl TrainerState {
    /// Seeds the stream and draws, in order: actor, critic, score and (MFCG)
    /// local score weights, the initial state, then the initial particle sets.
    pub fn init(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let actor = GaussianPolicy::init(&mut rng);
        let critic = CriticNet::init(&mut rng);
        let score = ScoreNet::init(&mut rng);
        let local_score = cfg.mode.is_mfcg().then(|| ScoreNet::init(&mut rng));
        let x0 =
            SampleSet::from_normal(1, cfg.initial_state_mean, cfg.initial_state_std, &mut rng)?
                .particles()[0];
        let samples = SampleSet::from_normal(
            cfg.n_particles,
            cfg.initial_state_mean,
            cfg.initial_state_std,
            &mut rng,
        )?;
        let local_samples = if cfg.mode.is_mfcg() {
            Some(SampleSet::from_normal(
                cfg.n_particles,
                cfg.initial_state_mean,
                cfg.initial_state_std,
                &mut rng,
            )?)
        } else {
            None
        };
        Ok(TrainerState {
            step: 0,
            state: x0,
            adam_actor: AdamState::new(actor.param_count()),
            adam_critic: AdamState::new(critic.net.params.len()),
            adam_score: AdamState::new(score.net.params.len()),
            adam_local_score: local_score
                .as_ref()
                .map(|s| AdamState::new(s.net.params.len())),
            actor,
            critic,
            score,
            local_score,
            samples,
            local_samples,
            rng,
            window: Window::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Termination {
    Completed,
    Fault { step: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Final (or, after a fault, last consistent) loop state.
    pub state: TrainerState,
    pub metrics: Vec<MetricRow>,
    pub wall_time_secs: f64,
    pub termination: Termination,
}

impl TrainResult {
    pub fn is_completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

/// Drives the loop; holds the configuration, the comparison targets and the
/// mutable [`TrainerState`].
pub struct Trainer<'e, E: MeanFieldEnv + ?Sized> {
    env: &'e E,
    cfg: TrainConfig,
    targets: MeanTargets,
    pub state: TrainerState,
}

impl<'e, E: MeanFieldEnv + ?Sized> Trainer<'e, E> {
    pub fn new(env: &'e E, cfg: TrainConfig, targets: MeanTargets) -> Result<Self> {
        let state = TrainerState::init(&cfg)?;
        Self::from_state(env, cfg, targets, state)
    }

    /// Continues from a saved state.
    pub fn from_state(
        env: &'e E,
        cfg: TrainConfig,
        targets: MeanTargets,
        state: TrainerState,
    ) -> Result<Self> {
        cfg.validate()?;
        if env.needs_local_field() != cfg.mode.is_mfcg() {
            return Err(Error::Config(format!(
                "{} mode does not match the environment (local field {})",
                cfg.mode,
                if env.needs_local_field() {
                    "required"
                } else {
                    "unused"
                }
            )));
        }
        if state.local_score.is_some() != cfg.mode.is_mfcg()
            || state.local_samples.is_some() != cfg.mode.is_mfcg()
            || state.adam_local_score.is_some() != cfg.mode.is_mfcg()
        {
            return Err(Error::Config(
                "trainer state does not match the configured mode".into(),
            ));
        }
        if state.step > cfg.n_steps {
            return Err(Error::Config(format!(
                "state is at step {} but the run has only {} steps",
                state.step, cfg.n_steps
            )));
        }
        Ok(Trainer {
            env,
            cfg,
            targets,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn targets(&self) -> MeanTargets {
        self.targets
    }

    /// Runs until `stop_at` (clamped to `n_steps`), reporting metric rows to
    /// `observer`. Faults are returned as errors with the state left at the
    /// start of the failing step.
    pub fn run_until(
        &mut self,
        stop_at: u64,
        observer: &mut dyn StepObserver,
    ) -> Result<Vec<MetricRow>> {
        let stop = stop_at.min(self.cfg.n_steps);
        let mut rows = Vec::new();
        while self.state.step < stop {
            let backup = self.state.clone();
            let n = self.state.step;
            if let Err(e) = self.step_once(observer) {
                self.state = backup;
                return Err(match e {
                    Error::NonFinite(msg) => Error::NonFinite(format!("step {n}: {msg}")),
                    other => other,
                });
            }
            let done = self.state.step;
            if done.is_multiple_of(self.cfg.log_interval) || done == self.cfg.n_steps {
                let row = self.metric_row()?;
                self.state.window = Window::default();
                observer.on_metrics(&row);
                rows.push(row);
            }
        }
        Ok(rows)
    }

    fn step_once(&mut self, obs: &mut dyn StepObserver) -> Result<()> {
        let cfg = &self.cfg;
        let st = &mut self.state;
        let n = st.step;
        let x = st.state;

        let loss = st.score.step(&mut st.adam_score, x, cfg.lr_score)?;
        obs.on_phase(n, Phase::ScoreUpdate);
        let mut local_loss = 0.0;
        if let (Some(ls), Some(la), Some(lr)) = (
            st.local_score.as_mut(),
            st.adam_local_score.as_mut(),
            cfg.lr_local_score,
        ) {
            local_loss = ls.step(la, x, lr)?;
            obs.on_phase(n, Phase::LocalScoreUpdate);
        }

        st.samples = langevin_sample(
            &st.score,
            &st.samples,
            cfg.langevin_eps,
            cfg.langevin_iters,
            &mut st.rng,
        )?;
        obs.on_phase(n, Phase::Sampling);
        if let (Some(ls), Some(set)) = (st.local_score.as_ref(), st.local_samples.as_ref()) {
            st.local_samples = Some(langevin_sample(
                ls,
                set,
                cfg.langevin_eps,
                cfg.langevin_iters,
                &mut st.rng,
            )?);
            obs.on_phase(n, Phase::LocalSampling);
        }

        let a = st.actor.sample_action(x, &mut st.rng)?.action;
        obs.on_phase(n, Phase::Action);

        let field = MeanField {
            global: &st.samples,
            local: st.local_samples.as_ref(),
        };
        let r = self.env.reward(x, a, &field);
        obs.on_phase(n, Phase::Reward);

        let mut x_next = self.env.next_state(x, a, &st.samples, &mut st.rng);
        if n < cfg.truncation_steps {
            x_next = truncate_state(x_next, cfg.truncation_bound);
        }
        if !(r.is_finite() && x_next.is_finite()) {
            return Err(Error::NonFinite(format!(
                "environment returned reward {r}, next state {x_next}"
            )));
        }
        obs.on_phase(n, Phase::Transition);

        let y = td_target(r, self.env.gamma(), st.critic.value(x_next)?);
        let delta = td_error(y, st.critic.value(x)?);
        obs.on_phase(n, Phase::TdError);

        let g_critic = st.critic.critic_loss_grad(x, delta)?;
        st.adam_critic
            .apply(&mut st.critic.net.params, &g_critic, cfg.lr_critic)?;
        obs.on_phase(n, Phase::CriticUpdate);

        let g_actor = st.actor.actor_loss_grad(x, a, delta)?;
        st.adam_actor
            .apply(&mut st.actor.net.params, &g_actor, cfg.lr_actor)?;
        obs.on_phase(n, Phase::ActorUpdate);

        st.window.td_abs += delta.abs();
        st.window.score_loss += loss;
        st.window.local_score_loss += local_loss;
        st.window.count += 1;
        st.state = x_next;
        st.step += 1;
        obs.on_state(n, x_next);
        Ok(())
    }

    fn metric_row(&self) -> Result<MetricRow> {
        let st = &self.state;
        let count = st.window.count.max(1) as f64;
        let err = |m: f64, t: Option<f64>| t.map_or(f64::NAN, |t| (m - t).abs());
        let sample_mean = st.samples.empirical_mean();
        let local = st.local_samples.as_ref().map(|set| {
            let m = set.empirical_mean();
            LocalMetrics {
                sample_mean: m,
                sample_var: set.empirical_variance(),
                abs_mean_error: err(m, self.targets.local),
                score_loss_avg: st.window.local_score_loss / count,
            }
        });
        Ok(MetricRow {
            step: st.step,
            sample_mean,
            sample_var: st.samples.empirical_variance(),
            abs_mean_error: err(sample_mean, self.targets.global),
            td_err_avg: st.window.td_abs / count,
            score_loss_avg: st.window.score_loss / count,
            control: probe_control(&st.actor, &self.cfg.probes)?,
            value: self
                .cfg
                .probes
                .iter()
                .map(|&p| st.critic.value(p))
                .collect::<Result<_>>()?,
            local,
        })
    }

    /// Runs to completion, converting faults into a [`Termination::Fault`].
    pub fn finish(mut self, observer: &mut dyn StepObserver) -> Result<TrainResult> {
        let start = Instant::now();
        let mut metrics = Vec::new();
        let termination = match self.run_until(self.cfg.n_steps, observer) {
            Ok(rows) => {
                metrics.extend(rows);
                Termination::Completed
            }
            Err(e) if e.is_fault() => Termination::Fault {
                step: self.state.step,
                message: e.to_string(),
            },
            Err(e) => return Err(e),
        };
        Ok(TrainResult {
            state: self.state,
            metrics,
            wall_time_secs: start.elapsed().as_secs_f64(),
            termination,
        })
    }
}

/// Single-population loop (MFG or MFC mode).
pub fn run_ih_mf_ac<E: MeanFieldEnv + ?Sized>(
    env: &E,
    cfg: &TrainConfig,
    targets: MeanTargets,
    observer: &mut dyn StepObserver,
) -> Result<TrainResult> {
    if cfg.mode.is_mfcg() {
        return Err(Error::Config("run_ih_mf_ac expects mfg or mfc mode".into()));
    }
    Trainer::new(env, cfg.clone(), targets)?.finish(observer)
}

/// Control-game loop with global and local distributions.
pub fn run_ih_mfcg_ac<E: MeanFieldEnv + ?Sized>(
    env: &E,
    cfg: &TrainConfig,
    targets: MeanTargets,
    observer: &mut dyn StepObserver,
) -> Result<TrainResult> {
    if !cfg.mode.is_mfcg() {
        return Err(Error::Config("run_ih_mfcg_ac expects mfcg mode".into()));
    }
    Trainer::new(env, cfg.clone(), targets)?.finish(observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{LqConfig, LqEnv};

    fn small(mode: Mode) -> TrainConfig {
        let mut c = TrainConfig::benchmark(mode);
        c.n_steps = 30;
        c.n_particles = 8;
        c.langevin_iters = 3;
        c.log_interval = 7;
        c.truncation_steps = 10;
        c
    }

    #[test]
    fn profiles() {
        let c = TrainConfig::benchmark(Mode::Mfg);
        assert_eq!(
            (c.n_steps, c.n_particles, c.langevin_iters),
            (200_000, 100, 50)
        );
        assert_eq!(c.truncation_steps, 40_000);
        let mut p = c.clone();
        p.apply_profile(Profile::Paper);
        assert_eq!(
            (p.n_steps, p.n_particles, p.langevin_iters),
            (1_000_000, 1000, 200)
        );
        assert_eq!(p.truncation_steps, 200_000);
        assert_eq!(TrainConfig::benchmark(Mode::Mfcg).n_steps, 400_000);
        for m in [Mode::Mfg, Mode::Mfc, Mode::Mfcg] {
            TrainConfig::benchmark(m).validate().unwrap();
        }
    }

    #[test]
    fn orderings() {
        let mut c = TrainConfig::benchmark(Mode::Mfg);
        c.lr_score = 6e-6;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("lr_score < min(lr_actor, lr_critic)"), "{msg}");
        let mut c = TrainConfig::benchmark(Mode::Mfc);
        c.lr_score = 1e-5;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::benchmark(Mode::Mfcg);
        c.lr_local_score = Some(1e-5);
        assert!(c.validate().is_err());
        c.lr_local_score = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn row_count_and_final_row() {
        let env = LqEnv::new(LqConfig::SET_1).unwrap();
        let cfg = small(Mode::Mfg);
        let res = run_ih_mf_ac(
            &env,
            &cfg,
            MeanTargets {
                global: Some(0.8),
                local: None,
            },
            &mut (),
        )
        .unwrap();
        assert!(res.is_completed());
        let steps: Vec<u64> = res.metrics.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![7, 14, 21, 28, 30]);
        assert_eq!(res.metrics.len() as u64, cfg.metric_rows_expected());
        for r in &res.metrics {
            assert_eq!(r.abs_mean_error, (r.sample_mean - 0.8).abs());
            assert_eq!(r.control.len(), cfg.probes.len());
            assert!(r.local.is_none());
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let env = LqEnv::new(LqConfig::SET_1).unwrap();
        let mut cfg = small(Mode::Mfc);
        cfg.n_steps = 0;
        let res = run_ih_mf_ac(&env, &cfg, MeanTargets::default(), &mut ()).unwrap();
        assert!(res.metrics.is_empty());
        assert_eq!(res.state, TrainerState::init(&cfg).unwrap());
    }

    #[test]
    fn mode_must_match_env() {
        let env = LqEnv::new(LqConfig::SET_1).unwrap();
        assert!(run_ih_mfcg_ac(&env, &small(Mode::Mfcg), MeanTargets::default(), &mut ()).is_err());
        assert!(run_ih_mf_ac(&env, &small(Mode::Mfcg), MeanTargets::default(), &mut ()).is_err());
    }

    #[test]
    fn header_layout() {
        let h = MetricRow::csv_header(&[0.0, 1.5], true);
        assert_eq!(
            h,
            vec![
                "step",
                "sample_mean",
                "sample_var",
                "abs_mean_error",
                "td_err_avg",
                "score_loss_avg",
                "control_0",
                "control_1.5",
                "value_0",
                "value_1.5",
                "local_sample_mean",
                "local_sample_var",
                "local_abs_mean_error",
                "local_score_loss_avg",
            ]
        );
    }
}
