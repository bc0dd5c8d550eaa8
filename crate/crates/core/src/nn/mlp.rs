use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{gemm_nn, gemm_nt, gemm_tn, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer followed by an activation. The weight is stored `in × out`
/// so a batch forward pass is `X · W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Feed-forward network of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct MlpRepr {
    layers: Vec<Layer>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        Mlp::from_layers(r.layers)
    }
}

impl From<Mlp> for MlpRepr {
    fn from(m: Mlp) -> Self {
        MlpRepr { layers: m.layers }
    }
}

/// Activations retained by a forward pass. `activations[0]` is the input,
/// `activations[i + 1]` the output of layer `i`; one row per sample.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    activations: Vec<Mat>,
}

impl ForwardTrace {
    pub fn input(&self) -> &Mat {
        &self.activations[0]
    }

    pub fn output(&self) -> &Mat {
        self.activations.last().expect("trace is never empty")
    }

    pub fn depth(&self) -> usize {
        self.activations.len() - 1
    }
}

/// Parameter gradients, shaped like the owning [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Mat, Vec<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Mat::zeros(l.weight.rows(), l.weight.cols()),
                        vec![0.0; l.bias.len()],
                    )
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.data_mut().iter_mut().for_each(|v| *v *= s);
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::dims("Mlp layer bias", l.output_dim(), l.bias.len()));
            }
            if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::dims(
                    "Mlp layer chain",
                    layers[i - 1].output_dim(),
                    l.input_dim(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    /// Builds a network with the given layer sizes (`sizes[0]` is the input
    /// width). Weights and biases are drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Mat::from_vec(
                    fan_in,
                    fan_out,
                    (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-bound..=bound))
                        .collect(),
                )
                .expect("sized buffer");
                let bias = (0..fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
                Layer {
                    weight,
                    bias,
                    activation: if i + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| Layer {
                weight: Mat::zeros(sizes[i], sizes[i + 1]),
                bias: vec![0.0; sizes[i + 1]],
                activation: if i + 1 == n { output } else { hidden },
            })
            .collect();
        Mlp { layers }
    }

    /// Re-draws the final layer from `U(-bound, bound)`, the usual small
    /// output initialisation for actor and critic heads.
    pub fn init_output_layer<R: Rng + ?Sized>(&mut self, bound: f64, rng: &mut R) {
        let last = self.layers.last_mut().expect("non-empty");
        for w in last.weight.data_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
        for b in &mut last.bias {
            *b = rng.gen_range(-bound..=bound);
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.param_slices().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols()
            })
    }

    /// Single-sample forward pass with trace.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        let x = Mat::from_vec(1, input.len(), input.to_vec())?;
        let (out, trace) = self.forward_batch(&x)?;
        Ok((out.into_vec(), trace))
    }

    /// Single-sample forward pass without retaining a trace.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::dims("Mlp::predict input", self.input_dim(), input.len()));
        }
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let mut next = layer.bias.clone();
            gemm_nn(
                &cur,
                layer.weight.data(),
                &mut next,
                1,
                layer.input_dim(),
                layer.output_dim(),
            );
            next.iter_mut()
                .for_each(|v| *v = layer.activation.apply(*v));
            cur = next;
        }
        Ok(cur)
    }

    /// Batched forward pass, one sample per row.
    pub fn forward_batch(&self, input: &Mat) -> Result<(Mat, ForwardTrace)> {
        if input.cols() != self.input_dim() {
            return Err(Error::dims("Mlp::forward input", self.input_dim(), input.cols()));
        }
        let batch = input.rows();
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut out = Mat::zeros(batch, layer.output_dim());
            for r in 0..batch {
                out.row_mut(r).copy_from_slice(&layer.bias);
            }
            gemm_nn(
                prev.data(),
                layer.weight.data(),
                out.data_mut(),
                batch,
                layer.input_dim(),
                layer.output_dim(),
            );
            if layer.activation != Activation::Identity {
                out.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = layer.activation.apply(*v));
            }
            activations.push(out);
        }
        let output = activations.last().expect("non-empty").clone();
        Ok((output, ForwardTrace { activations }))
    }

    pub fn predict_batch(&self, input: &Mat) -> Result<Mat> {
        Ok(self.forward_batch(input)?.0)
    }

    fn check_trace(&self, trace: &ForwardTrace, output_grad: &Mat) -> Result<()> {
        if trace.depth() != self.layers.len() {
            return Err(Error::dims("Mlp::backward trace depth", self.layers.len(), trace.depth()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if trace.activations[i].cols() != l.input_dim() {
                return Err(Error::dims(
                    "Mlp::backward trace layer",
                    l.input_dim(),
                    trace.activations[i].cols(),
                ));
            }
        }
        let out = trace.output();
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::dims(
                "Mlp::backward output grad",
                out.data().len(),
                output_grad.data().len(),
            ));
        }
        Ok(())
    }

    /// Reverse-mode pass: returns parameter gradients (summed over the
    /// batch) and the gradient with respect to the input rows.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &Mat) -> Result<(MlpGrads, Mat)> {
        self.backprop(trace, output_grad, true)
            .map(|(g, x)| (g.expect("requested"), x))
    }

    /// Input gradient only; skips the weight-gradient products.
    pub fn backward_input(&self, trace: &ForwardTrace, output_grad: &Mat) -> Result<Mat> {
        self.backprop(trace, output_grad, false).map(|(_, x)| x)
    }

    fn backprop(
        &self,
        trace: &ForwardTrace,
        output_grad: &Mat,
        want_params: bool,
    ) -> Result<(Option<MlpGrads>, Mat)> {
        self.check_trace(trace, output_grad)?;
        let batch = output_grad.rows();
        let mut grads = want_params.then(|| MlpGrads::zeros_like(self));
        let mut delta = output_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &trace.activations[i + 1];
            if layer.activation != Activation::Identity {
                for (d, y) in delta.data_mut().iter_mut().zip(out.data()) {
                    *d *= layer.activation.derivative_from_output(*y);
                }
            }
            let input = &trace.activations[i];
            if let Some(g) = grads.as_mut() {
                let (gw, gb) = &mut g.layers[i];
                gemm_tn(
                    input.data(),
                    delta.data(),
                    gw.data_mut(),
                    layer.input_dim(),
                    batch,
                    layer.output_dim(),
                );
                for r in 0..batch {
                    for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                        *b += d;
                    }
                }
            }
            let mut next = Mat::zeros(batch, layer.input_dim());
            gemm_nt(
                delta.data(),
                layer.weight.data(),
                next.data_mut(),
                batch,
                layer.output_dim(),
                layer.input_dim(),
            );
            delta = next;
        }
        Ok((grads, delta))
    }

    /// `self ← tau · online + (1 − tau) · self`, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if !self.same_shape(online) {
            return Err(Error::dims("soft_update", online.param_count(), self.param_count()));
        }
        for (t, o) in self.param_slices_mut().zip(online.param_slices()) {
            for (tv, ov) in t.iter_mut().zip(o) {
                *tv = tau * ov + (1.0 - tau) * *tv;
            }
        }
        Ok(())
    }
}
