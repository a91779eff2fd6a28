//! Forward evaluation and exact derivatives of [`NetSpec`] networks.
//!
//! Three derivative routes are provided:
//!
//! * reverse mode for vector-Jacobian products in the parameters,
//! * forward mode (one tangent per input coordinate) for the trace of the
//!   input Jacobian,
//! * reverse over the forward-tangent computation for the parameter gradient
//!   of the score-matching loss `tr(dS/dx) + |S(x)|^2 / 2`.
//!
//! Every affine layer accumulates `b + w_0 h_0 + w_1 h_1 + ...` in index order,
//! so scalar and batched evaluation give bitwise-identical outputs.

use super::{Activation, LayerShape, NetSpec, ParamVector};
use crate::error::{check_dim, Error, Result};

#[inline]
fn affine(layer: &LayerShape, p: &[f64], input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for o in 0..layer.fan_out {
        let row = &p[layer.weights + o * layer.fan_in..layer.weights + (o + 1) * layer.fan_in];
        let mut acc = p[layer.biases + o];
        for (w, h) in row.iter().zip(input) {
            acc += w * h;
        }
        out.push(acc);
    }
}

/// `out[j] = sum_o W[o][j] * upstream[o]` (transpose product).
#[inline]
fn affine_transpose(layer: &LayerShape, p: &[f64], upstream: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(layer.fan_in, 0.0);
    for (o, &u) in upstream.iter().enumerate() {
        if u == 0.0 {
            continue;
        }
        let row = &p[layer.weights + o * layer.fan_in..layer.weights + (o + 1) * layer.fan_in];
        for (acc, w) in out.iter_mut().zip(row) {
            *acc += w * u;
        }
    }
}

/// Activations recorded on the forward pass.
struct Tape {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(what))
    }
}

impl NetSpec {
    fn check_call(&self, params: &ParamVector, x: &[f64]) -> Result<()> {
        self.check_params(params)?;
        check_dim("network input", self.input_dim, x.len())
    }

    fn record(&self, params: &ParamVector, x: &[f64]) -> Tape {
        let p = params.as_slice();
        let layers = self.layers();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(layers.len());
        let mut h = x.to_vec();
        for layer in &layers {
            let mut z = Vec::with_capacity(layer.fan_out);
            affine(layer, p, &h, &mut z);
            let next: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        Tape {
            inputs,
            pre,
            output: h,
        }
    }

    /// Network output at `x`.
    pub fn forward(&self, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
        self.check_call(params, x)?;
        let p = params.as_slice();
        let mut h = x.to_vec();
        let mut z = Vec::with_capacity(self.max_width());
        for layer in self.layers() {
            affine(&layer, p, &h, &mut z);
            if layer.activation != Activation::Identity {
                layer.activation.apply_slice(&mut z);
            }
            std::mem::swap(&mut h, &mut z);
        }
        Ok(h)
    }

    /// Vector-Jacobian product `upstream^T d(forward)/d(params)` at `x`.
    ///
    /// Also returns the forward output, which callers usually need anyway.
    pub fn vjp_params(
        &self,
        params: &ParamVector,
        x: &[f64],
        upstream: &[f64],
    ) -> Result<(Vec<f64>, ParamVector)> {
        self.check_call(params, x)?;
        check_dim("upstream gradient", self.output_dim, upstream.len())?;
        let tape = self.record(params, x);
        let p = params.as_slice();
        let layers = self.layers();
        let mut grad = vec![0.0; p.len()];
        let mut adj = upstream.to_vec();
        let mut scratch = Vec::new();
        for (l, layer) in layers.iter().enumerate().rev() {
            // adj holds d/d(layer output); turn it into d/d(pre-activation).
            for (a, &z) in adj.iter_mut().zip(&tape.pre[l]) {
                *a *= layer.activation.eval2(z).1;
            }
            let input = &tape.inputs[l];
            for (o, &a) in adj.iter().enumerate() {
                grad[layer.biases + o] += a;
                let row = &mut grad
                    [layer.weights + o * layer.fan_in..layer.weights + (o + 1) * layer.fan_in];
                for (g, h) in row.iter_mut().zip(input) {
                    *g += a * h;
                }
            }
            if l > 0 {
                affine_transpose(layer, p, &adj, &mut scratch);
                std::mem::swap(&mut adj, &mut scratch);
            }
        }
        ensure_finite(&grad, "parameter gradient")?;
        Ok((tape.output, ParamVector(grad)))
    }

    /// `upstream * d(forward)/d(params)` for a scalar-output network.
    pub fn grad_params_scalar(
        &self,
        params: &ParamVector,
        x: &[f64],
        upstream: f64,
    ) -> Result<ParamVector> {
        check_dim("scalar-output network", 1, self.output_dim)?;
        self.vjp_params(params, x, &[upstream]).map(|(_, g)| g)
    }

    /// Forward pass carrying one tangent per input coordinate.
    ///
    /// Returns the tape, plus `tangents[l][i]` = d(input of layer l)/dx_i and
    /// `pre_tangents[l][i]` = d(pre-activation of layer l)/dx_i.
    fn record_tangents(&self, params: &ParamVector, x: &[f64]) -> (Tape, TangentTape) {
        let p = params.as_slice();
        let d = self.input_dim;
        let layers = self.layers();
        let mut tape = Tape {
            inputs: Vec::with_capacity(layers.len()),
            pre: Vec::with_capacity(layers.len()),
            output: Vec::new(),
        };
        let mut tt = TangentTape {
            inputs: Vec::with_capacity(layers.len()),
            pre: Vec::with_capacity(layers.len()),
            output: Vec::new(),
        };
        let mut h = x.to_vec();
        let mut dh: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        for layer in &layers {
            let mut z = Vec::with_capacity(layer.fan_out);
            affine(layer, p, &h, &mut z);
            let dz: Vec<Vec<f64>> = dh
                .iter()
                .map(|t| {
                    (0..layer.fan_out)
                        .map(|o| {
                            let row = &p[layer.weights + o * layer.fan_in
                                ..layer.weights + (o + 1) * layer.fan_in];
                            row.iter().zip(t).map(|(w, v)| w * v).sum()
                        })
                        .collect()
                })
                .collect();
            let (next, dnext): (Vec<f64>, Vec<f64>) = z
                .iter()
                .map(|&v| {
                    let (f, f1, _) = layer.activation.eval2(v);
                    (f, f1)
                })
                .unzip();
            let next_tangents: Vec<Vec<f64>> = dz
                .iter()
                .map(|t| t.iter().zip(&dnext).map(|(a, b)| a * b).collect())
                .collect();
            tape.inputs.push(std::mem::replace(&mut h, next));
            tape.pre.push(z);
            tt.inputs.push(std::mem::replace(&mut dh, next_tangents));
            tt.pre.push(dz);
        }
        tape.output = h;
        tt.output = dh;
        (tape, tt)
    }

    fn check_square(&self) -> Result<()> {
        check_dim(
            "input Jacobian trace (output_dim must equal input_dim)",
            self.input_dim,
            self.output_dim,
        )
    }

    /// Trace of the input Jacobian, `sum_i d out_i / d x_i`.
    pub fn input_derivative(&self, params: &ParamVector, x: &[f64]) -> Result<f64> {
        self.check_call(params, x)?;
        self.check_square()?;
        let (_, tt) = self.record_tangents(params, x);
        let trace: f64 = (0..self.input_dim).map(|i| tt.output[i][i]).sum();
        if trace.is_finite() {
            Ok(trace)
        } else {
            Err(Error::non_finite("input Jacobian trace"))
        }
    }

    /// Score-matching loss `tr(dS/dx) + |S(x)|^2 / 2` and its exact parameter
    /// gradient.
    pub fn score_loss_grad(&self, params: &ParamVector, x: &[f64]) -> Result<(f64, ParamVector)> {
        self.check_call(params, x)?;
        self.check_square()?;
        let d = self.input_dim;
        let (tape, tt) = self.record_tangents(params, x);
        let trace: f64 = (0..d).map(|i| tt.output[i][i]).sum();
        let half_sq: f64 = 0.5 * tape.output.iter().map(|y| y * y).sum::<f64>();
        let loss = trace + half_sq;
        if !loss.is_finite() {
            return Err(Error::non_finite("score loss"));
        }

        let p = params.as_slice();
        let layers = self.layers();
        let mut grad = vec![0.0; p.len()];
        // Adjoints of the layer output and of each output tangent.
        let mut adj = tape.output.clone();
        let mut adj_t: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        let mut scratch = Vec::new();
        for (l, layer) in layers.iter().enumerate().rev() {
            let z = &tape.pre[l];
            let dz = &tt.pre[l];
            let mut adj_z = vec![0.0; layer.fan_out];
            let mut adj_dz: Vec<Vec<f64>> = vec![vec![0.0; layer.fan_out]; d];
            for o in 0..layer.fan_out {
                let (_, f1, f2) = layer.activation.eval2(z[o]);
                let mut a = adj[o] * f1;
                for i in 0..d {
                    a += adj_t[i][o] * f2 * dz[i][o];
                    adj_dz[i][o] = adj_t[i][o] * f1;
                }
                adj_z[o] = a;
            }
            let input = &tape.inputs[l];
            let input_t = &tt.inputs[l];
            for o in 0..layer.fan_out {
                grad[layer.biases + o] += adj_z[o];
                let base = layer.weights + o * layer.fan_in;
                for j in 0..layer.fan_in {
                    let mut g = adj_z[o] * input[j];
                    for i in 0..d {
                        g += adj_dz[i][o] * input_t[i][j];
                    }
                    grad[base + j] += g;
                }
            }
            if l > 0 {
                affine_transpose(layer, p, &adj_z, &mut scratch);
                std::mem::swap(&mut adj, &mut scratch);
                for (i, a) in adj_dz.iter().enumerate() {
                    affine_transpose(layer, p, a, &mut scratch);
                    std::mem::swap(&mut adj_t[i], &mut scratch);
                }
            }
        }
        ensure_finite(&grad, "score loss gradient")?;
        Ok((loss, ParamVector(grad)))
    }
}

struct TangentTape {
    inputs: Vec<Vec<Vec<f64>>>,
    pre: Vec<Vec<Vec<f64>>>,
    output: Vec<Vec<f64>>,
}

/// Reusable buffers for evaluating one network on many inputs at once.
///
/// Activations are stored feature-major (`width x batch`) so the inner loops
/// run over the batch and vectorize.
#[derive(Debug, Default)]
pub struct BatchWorkspace {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

impl NetSpec {
    /// Evaluates the network on `batch` inputs stored sample-major in
    /// `inputs` (`batch * input_dim` values), writing sample-major outputs.
    pub fn forward_batch(
        &self,
        params: &ParamVector,
        inputs: &[f64],
        out: &mut Vec<f64>,
        ws: &mut BatchWorkspace,
    ) -> Result<()> {
        self.check_params(params)?;
        if !inputs.len().is_multiple_of(self.input_dim) {
            return Err(Error::Dimension {
                context: "batched network input",
                expected: self.input_dim,
                actual: inputs.len() % self.input_dim,
            });
        }
        let batch = inputs.len() / self.input_dim;
        let p = params.as_slice();
        if let [hidden, last] = self.layers()[..] {
            if self.input_dim == 1 && self.output_dim == 1 {
                scalar_one_hidden(p, hidden, last, inputs, out);
                return Ok(());
            }
        }
        let cur = &mut ws.a;
        let next = &mut ws.b;
        cur.clear();
        for i in 0..self.input_dim {
            cur.extend(inputs.iter().skip(i).step_by(self.input_dim));
        }
        for layer in self.layers() {
            next.clear();
            next.resize(layer.fan_out * batch, 0.0);
            for o in 0..layer.fan_out {
                let row = &mut next[o * batch..(o + 1) * batch];
                row.fill(p[layer.biases + o]);
                for j in 0..layer.fan_in {
                    let w = p[layer.weights + o * layer.fan_in + j];
                    let src = &cur[j * batch..(j + 1) * batch];
                    for (acc, h) in row.iter_mut().zip(src) {
                        *acc += w * h;
                    }
                }
                if layer.activation != Activation::Identity {
                    layer.activation.apply_slice(row);
                }
            }
            std::mem::swap(cur, next);
        }
        out.clear();
        out.resize(batch * self.output_dim, 0.0);
        for o in 0..self.output_dim {
            for b in 0..batch {
                out[b * self.output_dim + o] = cur[o * batch + b];
            }
        }
        Ok(())
    }
}

const LANES: usize = 16;

/// `R -> R` network with one hidden layer, evaluated a block of inputs at a
/// time without materializing the hidden activations. Summation order matches
/// [`NetSpec::forward`].
fn scalar_one_hidden(
    p: &[f64],
    hidden: LayerShape,
    last: LayerShape,
    xs: &[f64],
    out: &mut Vec<f64>,
) {
    let width = hidden.fan_out;
    let w1 = &p[hidden.weights..hidden.weights + width];
    let b1 = &p[hidden.biases..hidden.biases + width];
    let w2 = &p[last.weights..last.weights + width];
    let b2 = p[last.biases];
    out.clear();
    out.resize(xs.len(), 0.0);
    for (xc, oc) in xs.chunks(LANES).zip(out.chunks_mut(LANES)) {
        let mut x = [0.0; LANES];
        x[..xc.len()].copy_from_slice(xc);
        let mut acc = [b2; LANES];
        let mut h = [0.0; LANES];
        for u in 0..width {
            for l in 0..LANES {
                h[l] = b1[u] + w1[u] * x[l];
            }
            hidden.activation.apply_slice(&mut h);
            for l in 0..LANES {
                acc[l] += w2[u] * h[l];
            }
        }
        oc.copy_from_slice(&acc[..oc.len()]);
    }
}
