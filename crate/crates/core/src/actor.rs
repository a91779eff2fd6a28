//! Gaussian policy: state -> N(mean(x), std(x)^2) over a scalar action.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffnet::{self, Network, ParamVector};
use crate::error::{Error, Result};

pub const DEFAULT_STD_FLOOR: f64 = 1e-5;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Map from the raw std head output to a positive scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivityMap {
    #[default]
    Softplus,
    Exp,
    Sigmoid,
}

impl PositivityMap {
    /// `(g(raw), g'(raw))`
    fn eval(self, raw: f64) -> (f64, f64) {
        match self {
            PositivityMap::Softplus => (diffnet::softplus(raw), diffnet::sigmoid(raw)),
            PositivityMap::Exp => {
                let e = raw.exp();
                (e, e)
            }
            PositivityMap::Sigmoid => {
                let s = diffnet::sigmoid(raw);
                (s, s * (1.0 - s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub action: f64,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: Network,
    pub std_floor: f64,
    #[serde(default)]
    pub positivity: PositivityMap,
}

/// Log density of N(mu, sigma^2) at `a`.
pub fn gaussian_log_density(mu: f64, sigma: f64, a: f64) -> f64 {
    let u = (a - mu) / sigma;
    -sigma.ln() - HALF_LN_2PI - 0.5 * u * u
}

impl GaussianPolicy {
    pub fn new(net: Network, std_floor: f64, positivity: PositivityMap) -> Result<Self> {
        if net.spec.input_dim != 1 || net.spec.output_dim != 2 {
            return Err(Error::Config(
                "policy network must map 1 input to (mean, raw std)".into(),
            ));
        }
        if !(std_floor > 0.0) {
            return Err(Error::Config("std floor must be positive".into()));
        }
        Ok(GaussianPolicy {
            net,
            std_floor,
            positivity,
        })
    }

    /// Freshly initialized default policy (258 parameters, softplus std head).
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        GaussianPolicy {
            net: Network::init(diffnet::actor_spec(), rng),
            std_floor: DEFAULT_STD_FLOOR,
            positivity: PositivityMap::Softplus,
        }
    }

    pub fn param_count(&self) -> usize {
        self.net.params.len()
    }

    fn heads(&self, x: f64) -> Result<(f64, f64)> {
        let out = self.net.forward(&[x])?;
        if out.iter().all(|v| v.is_finite()) {
            Ok((out[0], out[1]))
        } else {
            Err(Error::non_finite("policy network output"))
        }
    }

    /// Mean and standard deviation of the action distribution at `x`.
    pub fn policy_params(&self, x: f64) -> Result<(f64, f64)> {
        let (mu, raw) = self.heads(x)?;
        Ok((mu, self.positivity.eval(raw).0 + self.std_floor))
    }

    /// Deterministic control readout (the mean head).
    pub fn mean(&self, x: f64) -> Result<f64> {
        self.heads(x).map(|(mu, _)| mu)
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<ActionSample> {
        let (mu, sigma) = self.policy_params(x)?;
        let z: f64 = rng.sample(StandardNormal);
        let action = mu + sigma * z;
        Ok(ActionSample {
            action,
            log_prob: gaussian_log_density(mu, sigma, action),
        })
    }

    pub fn log_prob(&self, x: f64, a: f64) -> Result<f64> {
        let (mu, sigma) = self.policy_params(x)?;
        Ok(gaussian_log_density(mu, sigma, a))
    }

    /// Gradient of `-delta * log pi(a | x)` in the policy parameters, with
    /// `delta` held constant.
    pub fn actor_loss_grad(&self, x: f64, a: f64, delta: f64) -> Result<ParamVector> {
        let (mu, raw) = self.heads(x)?;
        let (g, dg) = self.positivity.eval(raw);
        let sigma = g + self.std_floor;
        let diff = a - mu;
        let s2 = sigma * sigma;
        let dlogp_dmu = diff / s2;
        let dlogp_dsigma = -1.0 / sigma + diff * diff / (s2 * sigma);
        let upstream = [-delta * dlogp_dmu, -delta * dlogp_dsigma * dg];
        let (_, grad) = self
            .net
            .spec
            .vjp_params(&self.net.params, &[x], &upstream)?;
        Ok(grad)
    }
}

/// Actor mean head evaluated at each probe state.
pub fn probe_control(policy: &GaussianPolicy, probes: &[f64]) -> Result<Vec<f64>> {
    probes.iter().map(|&x| policy.mean(x)).collect()
}
