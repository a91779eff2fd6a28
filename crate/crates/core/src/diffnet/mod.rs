//! Small feed-forward networks with exact first and second order derivatives.

mod activation;
mod adam;
mod net;
mod spec;

pub use activation::{sigmoid, softplus, tanh, Activation};
pub use adam::{adam_update, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS_HAT};
pub use net::BatchWorkspace;
pub use spec::{HiddenLayer, LayerShape, NetSpec, ParamVector};

/// Actor trunk: 1 -> 64 tanh, with the mean and raw-std heads packed as a
/// two-unit affine output layer (258 parameters).
pub fn actor_spec() -> NetSpec {
    NetSpec::one_hidden(1, 64, Activation::Tanh, 2)
}

/// Critic: 1 -> 128 ELU -> 1 (385 parameters).
pub fn critic_spec() -> NetSpec {
    NetSpec::one_hidden(1, 128, Activation::Elu, 1)
}

/// Score: 1 -> 128 tanh -> 1 (385 parameters).
pub fn score_spec() -> NetSpec {
    NetSpec::one_hidden(1, 128, Activation::Tanh, 1)
}

/// A spec together with its current parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Network {
    pub spec: NetSpec,
    pub params: ParamVector,
}

impl Network {
    pub fn new(spec: NetSpec, params: ParamVector) -> crate::Result<Self> {
        spec.validate()?;
        spec.check_params(&params)?;
        Ok(Network { spec, params })
    }

    pub fn init<R: rand::Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Self {
        let params = spec.init_params(rng);
        Network { spec, params }
    }

    pub fn zeros(spec: NetSpec) -> Self {
        let params = spec.zero_params();
        Network { spec, params }
    }

    pub fn forward(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
        self.spec.forward(&self.params, x)
    }
}
