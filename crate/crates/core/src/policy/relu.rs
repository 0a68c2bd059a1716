use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HarmOutcome;
use crate::error::{Error, Result};

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::invalid("layer", "dimensions must be positive"));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::DimensionMismatch {
                expected: inputs * outputs,
                actual: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::DimensionMismatch {
                expected: outputs,
                actual: bias.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(r, b)| {
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// ReLU network with a scalar linear output; output > 0 is catastrophic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    layers: Vec<DenseLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("layers", "network needs at least one layer"));
        };
        if last.outputs != 1 {
            return Err(Error::invalid("layers", "final layer must have one output"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network with the given layer widths (input first, 1 last).
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::from_dims(dims, |_| 0.0)
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)` and N(0, 0.1^2) biases.
    pub fn random(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let scale = (1.0 / w[0] as f64).sqrt();
            let weights = (0..w[0] * w[1])
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let bias = (0..w[1])
                .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            layers.push(DenseLayer::new(w[0], w[1], weights, bias)?);
        }
        Self::new(layers)
    }

    /// Single affine layer `weights . x + bias`.
    pub fn affine(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let n = weights.len();
        Self::new(vec![DenseLayer::new(n, 1, weights, vec![bias])?])
    }

    fn from_dims(dims: &[usize], mut init: impl FnMut(usize) -> f64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("dims", "need input and output widths"));
        }
        let mut k = 0;
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let weights = (0..w[0] * w[1]).map(|_| { k += 1; init(k) }).collect();
            let bias = (0..w[1]).map(|_| { k += 1; init(k) }).collect();
            layers.push(DenseLayer::new(w[0], w[1], weights, bias)?);
        }
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                actual: params.len(),
            });
        }
        let mut net = self.clone();
        let mut rest = params;
        for l in &mut net.layers {
            let (w, r) = rest.split_at(l.weights.len());
            let (b, r) = r.split_at(l.bias.len());
            l.weights.copy_from_slice(w);
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(net)
    }

    /// Adds `delta` to the output bias.
    pub fn shift_output(&mut self, delta: f64) {
        let last = self.layers.last_mut().expect("validated non-empty");
        last.bias[0] += delta;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.activations(x).pop().expect("output layer")[0])
    }

    /// Pre-activations of every layer (ReLU applied between layers).
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.outputs);
            l.apply(&h, &mut z);
            if i + 1 < self.layers.len() {
                h = z.iter().map(|v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Hidden-unit on/off pattern at `x`.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<bool>> {
        self.check_input(x)?;
        let pre = self.activations(x);
        Ok(pre[..pre.len() - 1]
            .iter()
            .flat_map(|z| z.iter().map(|v| *v > 0.0))
            .collect())
    }

    /// Output and its gradient with respect to the input.
    pub fn output_and_input_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let pre = self.activations(x);
        let out = pre.last().expect("output")[0];
        let mut delta = vec![1.0];
        for (i, l) in self.layers.iter().enumerate().rev() {
            if i + 1 < self.layers.len() {
                for (d, z) in delta.iter_mut().zip(&pre[i]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut next = vec![0.0; l.inputs];
            for (r, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    let row = &l.weights[r * l.inputs..(r + 1) * l.inputs];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
                }
            }
            delta = next;
        }
        Ok((out, delta))
    }

    /// Output and its gradient with respect to the flattened parameters.
    pub fn output_and_parameter_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let pre = self.activations(x);
        let out = pre.last().expect("output")[0];
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut delta = vec![1.0];
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input: Vec<f64> = if i == 0 {
                x.to_vec()
            } else {
                pre[i - 1].iter().map(|v| v.max(0.0)).collect()
            };
            let mut g = vec![0.0; l.weights.len() + l.bias.len()];
            for (r, d) in delta.iter().enumerate() {
                for (c, v) in input.iter().enumerate() {
                    g[r * l.inputs + c] = d * v;
                }
                g[l.weights.len() + r] = *d;
            }
            grads.push(g);
            if i > 0 {
                let mut next = vec![0.0; l.inputs];
                for (r, d) in delta.iter().enumerate() {
                    let row = &l.weights[r * l.inputs..(r + 1) * l.inputs];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
                }
                for (n, z) in next.iter_mut().zip(&pre[i - 1]) {
                    if *z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        grads.reverse();
        Ok((out, grads.concat()))
    }
}

/// Harm is the positive part of the network output; `H_crit = 0`.
pub fn evaluate_relu(net: &ReluNetwork, x: &[f64]) -> Result<HarmOutcome> {
    let out = net.forward(x)?;
    HarmOutcome::new(out.max(0.0), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedStream;

    #[test]
    fn zero_network_is_harmless() {
        let net = ReluNetwork::zeros(&[3, 4, 1]).unwrap();
        let h = evaluate_relu(&net, &[1.0, -2.0, 5.0]).unwrap();
        assert_eq!(h.harm, 0.0);
        assert!(!h.catastrophic);
    }

    #[test]
    fn identity_network() {
        let net = ReluNetwork::affine(vec![1.0], 0.0).unwrap();
        assert!(!evaluate_relu(&net, &[-1.0]).unwrap().catastrophic);
        let h = evaluate_relu(&net, &[2.0]).unwrap();
        assert_eq!(h.harm, 2.0);
        assert!(h.catastrophic);
    }

    #[test]
    fn dimension_mismatch() {
        let net = ReluNetwork::zeros(&[2, 1]).unwrap();
        assert_eq!(
            evaluate_relu(&net, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        );
        assert!(ReluNetwork::new(vec![
            DenseLayer::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap(),
            DenseLayer::new(2, 1, vec![0.0; 2], vec![0.0]).unwrap(),
        ])
        .is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = ReluNetwork::random(&[3, 5, 4, 1], &mut SeedStream::new(4).rng(0)).unwrap();
        let x = [0.3, -0.7, 0.2];
        let (_, gx) = net.output_and_input_gradient(&x).unwrap();
        let h = 1e-7;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-6, "input {i}: {fd} vs {}", gx[i]);
        }
        let (_, gw) = net.output_and_parameter_gradient(&x).unwrap();
        let w = net.parameters();
        for i in 0..w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd = (net.with_parameters(&wp).unwrap().forward(&x).unwrap()
                - net.with_parameters(&wm).unwrap().forward(&x).unwrap())
                / (2.0 * h);
            assert!((fd - gw[i]).abs() < 1e-6, "param {i}: {fd} vs {}", gw[i]);
        }
    }

    #[test]
    fn parameter_round_trip() {
        let net = ReluNetwork::random(&[2, 3, 1], &mut SeedStream::new(5).rng(0)).unwrap();
        assert_eq!(net.with_parameters(&net.parameters()).unwrap(), net);
        assert_eq!(net.parameter_count(), 2 * 3 + 3 + 3 + 1);
    }
}
