//! State-value network and one-step TD quantities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffnet::{self, Network, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub net: Network,
}

impl CriticNet {
    pub fn new(net: Network) -> Result<Self> {
        if net.spec.input_dim != 1 || net.spec.output_dim != 1 {
            return Err(Error::Config(
                "critic must be a scalar function of the state".into(),
            ));
        }
        Ok(CriticNet { net })
    }

    /// Default 1 -> 128 ELU -> 1 critic.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        CriticNet {
            net: Network::init(diffnet::critic_spec(), rng),
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let v = self.net.forward(&[x])?[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite("critic output"))
        }
    }

    /// Semi-gradient of the squared TD error: `-2 delta grad V(x)`.
    ///
    /// The bootstrapped target does not contribute.
    pub fn critic_loss_grad(&self, x: f64, delta: f64) -> Result<ParamVector> {
        self.net
            .spec
            .grad_params_scalar(&self.net.params, &[x], -2.0 * delta)
    }
}

/// `r + gamma * v_next`
#[inline]
pub fn td_target(reward: f64, gamma: f64, v_next: f64) -> f64 {
    reward + gamma * v_next
}

/// `target - v_cur`
#[inline]
pub fn td_error(target: f64, v_cur: f64) -> f64 {
    target - v_cur
}
