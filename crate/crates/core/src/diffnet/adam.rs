use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS_HAT: f64 = 1e-8;

/// Moment estimates for Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_hyper(len, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS_HAT)
    }

    pub fn with_hyper(len: usize, beta1: f64, beta2: f64, eps_hat: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            eps_hat,
        }
    }

    /// One in-place Adam step: `params -= lr * m_hat / (sqrt(v_hat) + eps_hat)`.
    pub fn apply(&mut self, params: &mut ParamVector, grad: &ParamVector, lr: f64) -> Result<()> {
        check_dim("adam gradient", params.len(), grad.len())?;
        check_dim("adam state", params.len(), self.m.len())?;
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {lr}"
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        if params.is_finite() {
            Ok(())
        } else {
            Err(Error::non_finite("parameters after Adam update"))
        }
    }
}

/// Pure form of [`AdamState::apply`].
pub fn adam_update(
    params: &ParamVector,
    grad: &ParamVector,
    state: &AdamState,
    lr: f64,
) -> Result<(ParamVector, AdamState)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.apply(&mut p, grad, lr)?;
    Ok((p, s))
}
