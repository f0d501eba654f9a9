use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

impl Activation {
    fn apply(self, z: &[f64], out: &mut [f64]) {
        match self {
            Activation::Identity => out.copy_from_slice(z),
            Activation::Relu => out.iter_mut().zip(z).for_each(|(o, &v)| *o = v.max(0.0)),
            Activation::Sigmoid => out.iter_mut().zip(z).for_each(|(o, &v)| *o = sigmoid(v)),
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = (v - max).exp();
                    sum += *o;
                }
                out.iter_mut().for_each(|o| *o /= sum);
            }
        }
    }

    /// Turns dL/da into dL/dz in place, given the pre-activation `z` and output `a`.
    fn backprop(self, z: &[f64], a: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.iter_mut().zip(z).for_each(|(g, &v)| {
                if v <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.iter_mut().zip(a).for_each(|(g, &s)| *g *= s * (1.0 - s)),
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(a).map(|(g, s)| g * s).sum();
                grad.iter_mut().zip(a).for_each(|(g, &s)| *g = s * (*g - dot));
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            _ => Err(Error::Parse(format!("unknown activation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            _ => Err(Error::Parse(format!("unknown loss {s:?}"))),
        }
    }
}

/// Mean squared error over paired values.
pub fn mse_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape { expected: predictions.len(), got: labels.len() });
    }
    Ok(predictions.iter().zip(labels).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / predictions.len() as f64)
}

/// Cross-entropy of a probability vector against a target distribution.
pub fn cross_entropy(probabilities: &[f64], target: &[f64]) -> f64 {
    probabilities.iter().zip(target).filter(|(_, &t)| t > 0.0).map(|(&p, &t)| -t * p.max(1e-300).ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    /// One activation per non-input layer.
    pub activations: Vec<Activation>,
    pub loss: LossKind,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>, loss: LossKind) -> Result<Self> {
        let spec = Self { widths, activations, loss };
        spec.validate()?;
        Ok(spec)
    }

    /// ReLU hidden layers with the given output activation.
    pub fn relu_stack(widths: Vec<usize>, output: Activation, loss: LossKind) -> Result<Self> {
        let n = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n.saturating_sub(1)];
        activations.push(output);
        Self::new(widths, activations, loss)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "MLP widths must be >= 1 with at least two layers, got {:?}",
                self.widths
            )));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(Error::Shape { expected: self.widths.len() - 1, got: self.activations.len() });
        }
        let (last, hidden) = self.activations.split_last().expect("non-empty");
        if hidden.contains(&Activation::Softmax) {
            return Err(Error::Config("softmax is only allowed on the output layer".into()));
        }
        if (self.loss == LossKind::CrossEntropy) != (*last == Activation::Softmax) {
            return Err(Error::Config("cross-entropy loss requires a softmax output and vice versa".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// Dense feed-forward network. Parameters live in one flat vector, layer by
/// layer: the `out x in` weight matrix row-major, then the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// He-uniform weights scaled by fan-in, zero biases.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::with_capacity(spec.n_params());
        for w in spec.widths.windows(2) {
            let limit = (6.0 / w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_params();
        Ok(Self { spec, params: vec![0.0; n] })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.n_params() {
            return Err(Error::Shape { expected: spec.n_params(), got: params.len() });
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_layers(&self) -> usize {
        self.spec.activations.len()
    }

    /// Offsets of layer `l`'s weights and biases in the parameter vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.spec.widths.windows(2).take(l).map(|w| w[1] * (w[0] + 1)).sum();
        let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
        (start, start + n_in * n_out)
    }

    /// Weight matrix (`out x in`, row-major) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.offsets(l);
        let n_out = self.spec.widths[l + 1];
        (&self.params[w..b], &self.params[b..b + n_out])
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_width() {
            return Err(Error::Shape { expected: self.spec.input_width(), got: input.len() });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut z = Vec::new();
        for l in 0..self.n_layers() {
            let mut next = vec![0.0; self.spec.widths[l + 1]];
            self.affine(l, &cur, &mut z);
            self.spec.activations[l].apply(&z, &mut next);
            cur = next;
        }
        Ok(cur)
    }

    /// Forward pass keeping every intermediate value for `backward`.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        let mut trace = Trace::default();
        self.forward_trace_into(input, &mut trace)?;
        Ok(trace)
    }

    pub fn forward_trace_into(&self, input: &[f64], trace: &mut Trace) -> Result<()> {
        self.check_input(input)?;
        let n = self.n_layers();
        trace.acts.resize_with(n + 1, Vec::new);
        trace.pre.resize_with(n, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(input);
        for l in 0..n {
            let (done, rest) = trace.acts.split_at_mut(l + 1);
            self.affine(l, &done[l], &mut trace.pre[l]);
            rest[0].resize(self.spec.widths[l + 1], 0.0);
            self.spec.activations[l].apply(&trace.pre[l], &mut rest[0]);
        }
        Ok(())
    }

    fn affine(&self, l: usize, input: &[f64], out: &mut Vec<f64>) {
        let (w, b) = self.layer(l);
        let n_in = input.len();
        out.clear();
        out.extend(b.iter().enumerate().map(|(o, &bias)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
        }));
    }

    /// Per-sample loss of an output against its label.
    pub fn loss(&self, output: &[f64], label: &[f64]) -> f64 {
        match self.spec.loss {
            LossKind::Mse => mse_loss(output, label).unwrap_or(f64::NAN),
            LossKind::CrossEntropy => cross_entropy(output, label),
        }
    }

    /// Accumulates the gradient of the per-sample loss into `grads`.
    pub fn backward(&self, trace: &Trace, label: &[f64], grads: &mut [f64]) -> Result<()> {
        let out = trace.output();
        if label.len() != out.len() {
            return Err(Error::Shape { expected: out.len(), got: label.len() });
        }
        let delta: Vec<f64> = match self.spec.loss {
            // Softmax and cross-entropy combine into p - y.
            LossKind::CrossEntropy => {
                let mass: f64 = label.iter().sum();
                out.iter().zip(label).map(|(p, y)| p * mass - y).collect()
            }
            LossKind::Mse => {
                let mut g: Vec<f64> = out.iter().zip(label).map(|(p, y)| 2.0 * (p - y) / out.len() as f64).collect();
                let last = self.n_layers() - 1;
                self.spec.activations[last].backprop(&trace.pre[last], out, &mut g);
                g
            }
        };
        self.backward_delta(trace, delta, grads);
        Ok(())
    }

    /// Backpropagates an arbitrary gradient with respect to the network
    /// output, accumulating parameter gradients; returns dL/dinput.
    pub fn backward_output(&self, trace: &Trace, output_grad: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let last = self.n_layers() - 1;
        let mut g = output_grad.to_vec();
        self.spec.activations[last].backprop(&trace.pre[last], trace.output(), &mut g);
        self.backward_delta(trace, g, grads)
    }

    fn backward_delta(&self, trace: &Trace, mut delta: Vec<f64>, grads: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.params.len());
        for l in (0..self.n_layers()).rev() {
            let (w_off, b_off) = self.offsets(l);
            let input = &trace.acts[l];
            let n_in = input.len();
            for (o, &d) in delta.iter().enumerate() {
                grads[b_off + o] += d;
                if d != 0.0 {
                    let row = &mut grads[w_off + o * n_in..w_off + (o + 1) * n_in];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                }
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]).for_each(|(p, wv)| *p += d * wv);
                }
            }
            if l > 0 {
                self.spec.activations[l - 1].backprop(&trace.pre[l - 1], &trace.acts[l], &mut prev);
            }
            delta = prev;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use approx::assert_relative_eq;

    #[test]
    fn zero_model_sigmoid_is_half() {
        let spec = MlpSpec::relu_stack(vec![3, 16, 4, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
        let m = Mlp::zeros(spec).unwrap();
        assert_eq!(m.forward(&[0.3, -2.0, 7.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let spec = MlpSpec::relu_stack(vec![1, 1, 1], Activation::Identity, LossKind::Mse).unwrap();
        // w1 = 1, b1 = 0, w2 = 5, b2 = 0.25.
        let m = Mlp::from_params(spec, vec![1.0, 0.0, 5.0, 0.25]).unwrap();
        assert_eq!(m.forward(&[-3.0]).unwrap(), vec![0.25]);
        assert_eq!(m.forward(&[2.0]).unwrap(), vec![10.25]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let spec = MlpSpec::relu_stack(vec![3, 4, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
        let m = Mlp::new(spec, &mut rng_for(0, &[])).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { expected: 3, got: 1 })));
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::relu_stack(vec![3, 0, 1], Activation::Sigmoid, LossKind::Mse).is_err());
        assert!(MlpSpec::relu_stack(vec![3, 4, 2], Activation::Sigmoid, LossKind::CrossEntropy).is_err());
        assert!(MlpSpec::relu_stack(vec![3, 4, 2], Activation::Softmax, LossKind::Mse).is_err());
        assert!(MlpSpec::new(vec![3, 4, 2], vec![Activation::Softmax, Activation::Softmax], LossKind::CrossEntropy)
            .is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_relative_eq!(mse_loss(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 5.0 / 3.0);
        assert!(matches!(mse_loss(&[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn bias_only_gradient_by_hand() {
        // 1 -> 1 with zero weight: output = sigmoid(b).
        let spec = MlpSpec::new(vec![1, 1], vec![Activation::Sigmoid], LossKind::Mse).unwrap();
        let b = 0.4;
        let m = Mlp::from_params(spec, vec![0.0, b]).unwrap();
        let trace = m.forward_trace(&[0.7]).unwrap();
        let mut g = vec![0.0; 2];
        m.backward(&trace, &[0.9], &mut g).unwrap();
        let s = sigmoid(b);
        assert_relative_eq!(g[1], 2.0 * (s - 0.9) * s * (1.0 - s), max_relative = 1e-14);
        assert_relative_eq!(g[0], g[1] * 0.7, max_relative = 1e-14);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let spec = MlpSpec::relu_stack(vec![2, 3, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
        let m = Mlp::new(spec, &mut rng_for(5, &[])).unwrap();
        let x = [0.2, 0.9];
        let trace = m.forward_trace(&x).unwrap();
        let label = trace.output().to_vec();
        let mut g = vec![0.0; m.params().len()];
        m.backward(&trace, &label, &mut g).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }
}
