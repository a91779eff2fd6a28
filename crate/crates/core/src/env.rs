//! Model-free environment boundary and the linear-quadratic benchmarks.
//!
//! The trainer only sees [`MeanFieldEnv`]: it hands over the state, the action
//! and the current particle sets, and gets back a reward and a next state.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::SampleSet;

/// Particle sets visible to the environment at one step.
#[derive(Debug, Clone, Copy)]
pub struct MeanField<'a> {
    pub global: &'a SampleSet,
    /// Within-group distribution; only present for control games.
    pub local: Option<&'a SampleSet>,
}

pub trait MeanFieldEnv {
    /// `r = -f(x, mu, a) dt`
    fn reward(&self, x: f64, a: f64, field: &MeanField<'_>) -> f64;

    /// One Euler-Maruyama step; draws exactly one standard normal from `rng`.
    fn next_state(&self, x: f64, a: f64, global: &SampleSet, rng: &mut dyn RngCore) -> f64;

    fn dt(&self) -> f64;

    /// Continuous-time discount rate `beta`.
    fn discount_rate(&self) -> f64;

    /// Whether the reward consumes a local (within-group) distribution.
    fn needs_local_field(&self) -> bool {
        false
    }

    /// Per-step discount `exp(-beta dt)`.
    fn gamma(&self) -> f64 {
        (-self.discount_rate() * self.dt()).exp()
    }
}

fn check_common(sigma: f64, beta: f64, dt: f64) -> Result<()> {
    let ok = |v: f64| v > 0.0 && v.is_finite();
    if !ok(sigma) || !ok(beta) || !ok(dt) {
        return Err(Error::Config(format!(
            "sigma, beta and dt must be positive (got sigma={sigma}, beta={beta}, dt={dt})"
        )));
    }
    Ok(())
}

/// Running cost `a^2/2 + c1 (x - c2 m)^2 + c3 (x - c4)^2 + c5 m^2` with
/// dynamics `dX = a dt + sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
}

impl LqConfig {
    /// First coefficient set of the LQ benchmark.
    pub const SET_1: LqConfig = LqConfig {
        c1: 0.25,
        c2: 1.5,
        c3: 0.5,
        c4: 0.6,
        c5: 1.0,
        sigma: 0.3,
        beta: 1.0,
        dt: 0.01,
    };

    /// Second coefficient set of the LQ benchmark.
    pub const SET_2: LqConfig = LqConfig {
        c1: 0.15,
        c2: 1.0,
        c3: 0.25,
        c4: 1.0,
        c5: 2.0,
        sigma: 0.5,
        beta: 1.0,
        dt: 0.01,
    };

    pub fn validate(&self) -> Result<()> {
        check_common(self.sigma, self.beta, self.dt)?;
        let mfg_den = self.c1 + self.c3 - self.c1 * self.c2;
        let mfc_den = self.c1 + self.c3 + self.c5 - self.c1 * self.c2 * (2.0 - self.c2);
        if mfg_den == 0.0 || mfc_den == 0.0 {
            return Err(Error::Degenerate(format!(
                "LQ mean denominators must be nonzero (MFG {mfg_den}, MFC {mfc_den})"
            )));
        }
        Ok(())
    }

    pub fn running_cost(&self, x: f64, a: f64, m: f64) -> f64 {
        let dx = x - self.c2 * m;
        let dc = x - self.c4;
        0.5 * a * a + self.c1 * dx * dx + self.c3 * dc * dc + self.c5 * m * m
    }
}

/// MFCG running cost: the LQ cost without `c5`, plus
/// `ct1 (x - ct2 m_loc)^2 + ct5 m_loc^2` on the local mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfcgConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub ct1: f64,
    pub ct2: f64,
    pub ct5: f64,
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
}

impl MfcgConfig {
    /// Control-game benchmark coefficients.
    pub const BENCHMARK: MfcgConfig = MfcgConfig {
        c1: 0.5,
        c2: 1.5,
        c3: 0.5,
        c4: 0.25,
        ct1: 0.3,
        ct2: 1.25,
        ct5: 0.25,
        sigma: 0.5,
        beta: 1.0,
        dt: 0.01,
    };

    pub fn mean_denominator(&self) -> f64 {
        self.c1 * (1.0 - self.c2)
            + self.ct1 * (1.0 - self.ct2) * (1.0 - self.ct2)
            + self.c3
            + self.ct5
    }

    pub fn validate(&self) -> Result<()> {
        check_common(self.sigma, self.beta, self.dt)?;
        if self.mean_denominator() == 0.0 {
            return Err(Error::Degenerate("MFCG mean denominator is zero".into()));
        }
        Ok(())
    }

    pub fn running_cost(&self, x: f64, a: f64, m_global: f64, m_local: f64) -> f64 {
        let dg = x - self.c2 * m_global;
        let dc = x - self.c4;
        let dl = x - self.ct2 * m_local;
        0.5 * a * a
            + self.c1 * dg * dg
            + self.c3 * dc * dc
            + self.ct1 * dl * dl
            + self.ct5 * m_local * m_local
    }
}

/// LQ reward for state `x`, action `a`, population mean `m`.
pub fn lq_reward(cfg: &LqConfig, x: f64, a: f64, m: f64) -> f64 {
    -cfg.running_cost(x, a, m) * cfg.dt
}

/// MFCG reward given the global and local population means.
pub fn mfcg_reward(cfg: &MfcgConfig, x: f64, a: f64, m_global: f64, m_local: f64) -> f64 {
    -cfg.running_cost(x, a, m_global, m_local) * cfg.dt
}

/// `x + a dt + sigma sqrt(dt) z`
pub fn euler_step(x: f64, a: f64, sigma: f64, dt: f64, z: f64) -> f64 {
    x + a * dt + sigma * dt.sqrt() * z
}

/// LQ dynamics step with a fresh standard normal from `rng`.
pub fn lq_step(cfg: &LqConfig, x: f64, a: f64, rng: &mut dyn RngCore) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    euler_step(x, a, cfg.sigma, cfg.dt, z)
}

/// Clamp to `[-bound, bound]`.
pub fn truncate_state(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}

/// LQ mean-field environment (MFG or MFC, depending on the learning rates).
#[derive(Debug, Clone)]
pub struct LqEnv {
    cfg: LqConfig,
}

impl LqEnv {
    pub fn new(cfg: LqConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LqEnv { cfg })
    }

    pub fn config(&self) -> &LqConfig {
        &self.cfg
    }
}

impl MeanFieldEnv for LqEnv {
    fn reward(&self, x: f64, a: f64, field: &MeanField<'_>) -> f64 {
        lq_reward(&self.cfg, x, a, field.global.empirical_mean())
    }

    fn next_state(&self, x: f64, a: f64, _global: &SampleSet, rng: &mut dyn RngCore) -> f64 {
        lq_step(&self.cfg, x, a, rng)
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn discount_rate(&self) -> f64 {
        self.cfg.beta
    }
}

/// LQ mean field control game environment.
#[derive(Debug, Clone)]
pub struct MfcgEnv {
    cfg: MfcgConfig,
}

impl MfcgEnv {
    pub fn new(cfg: MfcgConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MfcgEnv { cfg })
    }

    pub fn config(&self) -> &MfcgConfig {
        &self.cfg
    }
}

impl MeanFieldEnv for MfcgEnv {
    fn reward(&self, x: f64, a: f64, field: &MeanField<'_>) -> f64 {
        let m_local = field.local.map_or(0.0, SampleSet::empirical_mean);
        mfcg_reward(&self.cfg, x, a, field.global.empirical_mean(), m_local)
    }

    fn next_state(&self, x: f64, a: f64, _global: &SampleSet, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        euler_step(x, a, self.cfg.sigma, self.cfg.dt, z)
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn discount_rate(&self) -> f64 {
        self.cfg.beta
    }

    fn needs_local_field(&self) -> bool {
        true
    }
}
