//! Closed-form solutions of the linear-quadratic benchmarks.
//!
//! In all three problems the value function is `v(x) = G2 x^2 + G1 x + G0`,
//! the optimal feedback is `a(x) = -(2 G2 x + G1)`, and the controlled state is
//! an Ornstein-Uhlenbeck process with limiting law `N(-G1 / (2 G2), sigma^2 / (4 G2))`.
//! `G2` is the positive root of `2 G2^2 + beta G2 - C = 0`.
//!
//! # Best-response maps
//!
//! The residual checks use maps derived independently of the printed
//! solutions. Freeze the population mean at `m` and solve the HJB equation
//! `beta v = -v'^2/2 + sigma^2 v''/2 + f(x, m)` with a quadratic ansatz.
//! Matching the `x^2` terms gives the `G2` quadratic; matching the `x` terms
//! gives `G1 = -2 (c1 c2 m + c3 c4) / (beta + 2 G2)`, so the induced stationary
//! mean is
//!
//! ```text
//! Phi(m) = (c1 c2 m + c3 c4) / (c1 + c3)       (using G2 (beta + 2 G2) = c1 + c3)
//! ```
//!
//! A Nash equilibrium of the game is a fixed point of `Phi`.
//!
//! For the control problem the mean is a social optimum instead: with the
//! variance pinned by `G2`, the stationary cost is minimized in the mean,
//! `d/dm [c1 (1 - c2)^2 m^2 + c3 (m - c4)^2 + c5 m^2] = 0`.
//!
//! For the control game the global mean `m` is frozen and the group optimizes
//! its own mean `l` against
//! `c1 (l - c2 m)^2 + c3 (l - c4)^2 + ct1 (1 - ct2)^2 l^2 + ct5 l^2`, giving
//! `Phi(m) = (c1 c2 m + c3 c4) / (c1 + c3 + ct1 (1 - ct2)^2 + ct5)`, and the
//! equilibrium is again a fixed point.

use serde::{Deserialize, Serialize};

use crate::env::{LqConfig, MfcgConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionKind {
    Mfg,
    Mfc,
    Mfcg,
}

impl std::fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolutionKind::Mfg => "mfg",
            SolutionKind::Mfc => "mfc",
            SolutionKind::Mfcg => "mfcg",
        })
    }
}

impl std::str::FromStr for SolutionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mfg" => Ok(SolutionKind::Mfg),
            "mfc" => Ok(SolutionKind::Mfc),
            "mfcg" => Ok(SolutionKind::Mfcg),
            other => Err(Error::Config(format!("unknown solution kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSolution {
    pub kind: SolutionKind,
    pub gamma2: f64,
    pub gamma1: f64,
    pub gamma0: f64,
    /// Mean of the limiting distribution.
    pub mean: f64,
    /// Variance of the limiting distribution.
    pub variance: f64,
}

impl AnalyticSolution {
    pub fn optimal_control(&self, x: f64) -> f64 {
        optimal_control(self, x)
    }

    pub fn value_function(&self, x: f64) -> f64 {
        value_function(self, x)
    }

    /// Limiting Gaussian density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let u = x - self.mean;
        (-0.5 * u * u / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// Positive root of `2 g^2 + beta g - c = 0`.
fn gamma2_root(beta: f64, c: f64) -> f64 {
    (-beta + (beta * beta + 8.0 * c).sqrt()) / 4.0
}

fn nonzero(value: f64, what: &str) -> Result<f64> {
    if value == 0.0 || !value.is_finite() {
        Err(Error::Degenerate(format!("{what} is zero")))
    } else {
        Ok(value)
    }
}

/// Mean field game equilibrium.
pub fn solve_mfg(cfg: &LqConfig) -> Result<AnalyticSolution> {
    let g2 = gamma2_root(cfg.beta, cfg.c1 + cfg.c3);
    let g1_den = nonzero(
        g2 * (cfg.beta + 2.0 * g2) - cfg.c1 * cfg.c2,
        "G2 (beta + 2 G2) - c1 c2",
    )?;
    let mean_den = nonzero(cfg.c1 + cfg.c3 - cfg.c1 * cfg.c2, "c1 + c3 - c1 c2")?;
    let g1 = -2.0 * g2 * cfg.c3 * cfg.c4 / g1_den;
    let mean = cfg.c3 * cfg.c4 / mean_den;
    let gamma0 = (cfg.c5 * mean * mean
        + cfg.c3 * cfg.c4 * cfg.c4
        + cfg.c1 * cfg.c2 * cfg.c2 * mean * mean
        + cfg.sigma * cfg.sigma * g2
        - 0.5 * g1 * g1)
        / cfg.beta;
    Ok(AnalyticSolution {
        kind: SolutionKind::Mfg,
        gamma2: g2,
        gamma1: g1,
        gamma0,
        mean,
        variance: cfg.sigma * cfg.sigma / (4.0 * g2),
    })
}

/// Mean field control optimum.
pub fn solve_mfc(cfg: &LqConfig) -> Result<AnalyticSolution> {
    let g2 = gamma2_root(cfg.beta, cfg.c1 + cfg.c3);
    let coupling = cfg.c5 - cfg.c1 * cfg.c2 * (2.0 - cfg.c2);
    let g1_den = nonzero(
        g2 * (cfg.beta + 2.0 * g2) + coupling,
        "G2 (beta + 2 G2) + c5 - c1 c2 (2 - c2)",
    )?;
    let mean_den = nonzero(cfg.c1 + cfg.c3 + coupling, "c1 + c3 + c5 - c1 c2 (2 - c2)")?;
    let g1 = -2.0 * g2 * cfg.c3 * cfg.c4 / g1_den;
    let mean = cfg.c3 * cfg.c4 / mean_den;
    let gamma0 = (cfg.c5 * mean * mean
        + cfg.c3 * cfg.c4 * cfg.c4
        + cfg.c1 * cfg.c2 * cfg.c2 * mean * mean
        + cfg.sigma * cfg.sigma * g2
        - 0.5 * g1 * g1)
        / cfg.beta;
    Ok(AnalyticSolution {
        kind: SolutionKind::Mfc,
        gamma2: g2,
        gamma1: g1,
        gamma0,
        mean,
        variance: cfg.sigma * cfg.sigma / (4.0 * g2),
    })
}

/// Mean field control game equilibrium.
pub fn solve_mfcg(cfg: &MfcgConfig) -> Result<AnalyticSolution> {
    let g2 = gamma2_root(cfg.beta, cfg.c1 + cfg.c3 + cfg.ct1);
    let den = nonzero(cfg.mean_denominator(), "MFCG mean denominator")?;
    let g1 = -2.0 * g2 * cfg.c3 * cfg.c4 / den;
    let mean = cfg.c3 * cfg.c4 / den;
    let gamma0 = (cfg.c1 * cfg.c2 * cfg.c2 * mean * mean
        + (cfg.ct1 * cfg.ct2 * cfg.ct2 + cfg.ct5) * mean * mean
        + cfg.sigma * cfg.sigma * g2
        - 0.5 * g1 * g1
        + cfg.c3 * cfg.c4 * cfg.c4)
        / cfg.beta;
    Ok(AnalyticSolution {
        kind: SolutionKind::Mfcg,
        gamma2: g2,
        gamma1: g1,
        gamma0,
        mean,
        variance: cfg.sigma * cfg.sigma / (4.0 * g2),
    })
}

/// `-(2 G2 x + G1)`
pub fn optimal_control(sol: &AnalyticSolution, x: f64) -> f64 {
    -(2.0 * sol.gamma2 * x + sol.gamma1)
}

/// `G2 x^2 + G1 x + G0`
pub fn value_function(sol: &AnalyticSolution, x: f64) -> f64 {
    (sol.gamma2 * x + sol.gamma1) * x + sol.gamma0
}

/// `|2 G2^2 + beta G2 - c|` for the quadratic defining `G2`.
pub fn quadratic_residual(gamma2: f64, beta: f64, c: f64) -> f64 {
    (2.0 * gamma2 * gamma2 + beta * gamma2 - c).abs()
}

/// Best-response mean of a representative agent facing a frozen population
/// mean `m` in the LQ game.
pub fn mfg_best_response_mean(cfg: &LqConfig, m: f64) -> f64 {
    (cfg.c1 * cfg.c2 * m + cfg.c3 * cfg.c4) / (cfg.c1 + cfg.c3)
}

/// `|Phi(m_hat) - m_hat|` at the closed-form game mean.
pub fn mfg_fixed_point_residual(cfg: &LqConfig) -> Result<f64> {
    let m = solve_mfg(cfg)?.mean;
    Ok((mfg_best_response_mean(cfg, m) - m).abs())
}

/// Derivative of the stationary mean cost of the control problem at the
/// closed-form optimum (zero at a social optimum).
pub fn mfc_stationarity_residual(cfg: &LqConfig) -> Result<f64> {
    let m = solve_mfc(cfg)?.mean;
    let one_minus = 1.0 - cfg.c2;
    Ok((cfg.c1 * one_minus * one_minus * m + cfg.c3 * (m - cfg.c4) + cfg.c5 * m).abs())
}

/// Group-optimal mean given a frozen global mean in the control game.
pub fn mfcg_best_response_mean(cfg: &MfcgConfig, m_global: f64) -> f64 {
    let d = 1.0 - cfg.ct2;
    (cfg.c1 * cfg.c2 * m_global + cfg.c3 * cfg.c4) / (cfg.c1 + cfg.c3 + cfg.ct1 * d * d + cfg.ct5)
}

pub fn mfcg_fixed_point_residual(cfg: &MfcgConfig) -> Result<f64> {
    let m = solve_mfcg(cfg)?.mean;
    Ok((mfcg_best_response_mean(cfg, m) - m).abs())
}
