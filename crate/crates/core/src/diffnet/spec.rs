use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub width: usize,
    pub activation: Activation,
}

/// Shape of a fully connected feed-forward network.
///
/// Hidden layers carry their own activation; the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<HiddenLayer>,
    pub output_dim: usize,
}

/// Offsets of one affine layer inside a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
    /// Start of the row-major `fan_out x fan_in` weight block.
    pub weights: usize,
    /// Start of the `fan_out` bias block (directly after the weights).
    pub biases: usize,
}

impl NetSpec {
    pub fn new(input_dim: usize, hidden: Vec<HiddenLayer>, output_dim: usize) -> Result<Self> {
        let spec = NetSpec {
            input_dim,
            hidden,
            output_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single hidden layer network, the only topology the solver uses.
    pub fn one_hidden(
        input_dim: usize,
        width: usize,
        activation: Activation,
        output_dim: usize,
    ) -> Self {
        NetSpec {
            input_dim,
            hidden: vec![HiddenLayer { width, activation }],
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        if self.hidden.iter().any(|h| h.width == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim;
        let mut offset = 0;
        let widths = self
            .hidden
            .iter()
            .map(|h| (h.width, h.activation))
            .chain(std::iter::once((self.output_dim, Activation::Identity)));
        for (fan_out, activation) in widths {
            out.push(LayerShape {
                fan_in,
                fan_out,
                activation,
                weights: offset,
                biases: offset + fan_in * fan_out,
            });
            offset += (fan_in + 1) * fan_out;
            fan_in = fan_out;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| (l.fan_in + 1) * l.fan_out)
            .sum()
    }

    pub fn max_width(&self) -> usize {
        self.hidden
            .iter()
            .map(|h| h.width)
            .chain([self.input_dim, self.output_dim])
            .max()
            .unwrap_or(1)
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = vec![0.0; self.param_count()];
        for layer in self.layers() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for w in &mut values[layer.weights..layer.biases] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        ParamVector(values)
    }

    pub fn zero_params(&self) -> ParamVector {
        ParamVector(vec![0.0; self.param_count()])
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        crate::error::check_dim("parameter vector", self.param_count(), params.len())
    }
}

/// Flat network parameters: per layer, row-major weights then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        for v in &mut self.0 {
            *v *= k;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}
