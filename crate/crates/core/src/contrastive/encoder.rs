//! A small fully-connected encoder standing in for the convolutional
//! backbone: a tanh MLP backbone feeding a two-layer instance projector and
//! a two-layer cluster projector with a softmax output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
    Softmax,
}

impl Activation {
    fn apply(self, mut z: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
            Activation::Softmax => {
                for mut row in z.rows_mut() {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.mapv_inplace(|x| (x - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|x| x / sum);
                }
            }
        }
        z
    }

    /// Gradient w.r.t. the pre-activation given the output `a` and the
    /// gradient `g` w.r.t. the output.
    fn backward(self, a: &Array2<f64>, g: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => g * &a.mapv(|y| 1.0 - y * y),
            Activation::Identity => g,
            Activation::Softmax => {
                let mut out = g;
                for (mut grow, arow) in out.rows_mut().into_iter().zip(a.rows()) {
                    let dot = grow.dot(&arow);
                    for (gi, &ai) in grow.iter_mut().zip(arow.iter()) {
                        *gi = ai * (*gi - dot);
                    }
                }
                out
            }
        }
    }
}

/// Affine layer `y = act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    fn random(input: usize, output: usize, activation: Activation, rng: &mut seed::Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let weight = Array2::from_shape_fn((output, input), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(output, |_| rng.random_range(-0.1..0.1));
        Self {
            weight,
            bias,
            activation,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.dim()),
            bias: Array1::zeros(self.bias.len()),
            activation: self.activation,
        }
    }

    fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.activation.apply(x.dot(&self.weight.t()) + &self.bias)
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Layer widths of a [`ToyEncoder`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderShape {
    pub input_dim: usize,
    pub backbone: Vec<usize>,
    pub instance_hidden: usize,
    pub instance_dim: usize,
    pub cluster_hidden: usize,
    pub clusters: usize,
}

impl EncoderShape {
    /// A three-layer backbone and the default 128-wide instance space.
    pub fn new(input_dim: usize, clusters: usize) -> Self {
        Self {
            input_dim,
            backbone: vec![64, 64, 32],
            instance_hidden: 64,
            instance_dim: 128,
            cluster_hidden: 64,
            clusters,
        }
    }

    fn validate(&self) -> Result<()> {
        let widths = [
            self.input_dim,
            self.instance_hidden,
            self.instance_dim,
            self.cluster_hidden,
        ];
        if self.backbone.is_empty() || self.backbone.contains(&0) || widths.contains(&0) {
            return Err(Error::invalid("encoder layer widths must be positive"));
        }
        if self.clusters < 2 {
            return Err(Error::invalid("cluster projector needs at least 2 outputs"));
        }
        Ok(())
    }
}

/// Backbone, instance projector and cluster projector.
///
/// Layers are stored in one list: the backbone first, then the two instance
/// projector layers, then the two cluster projector layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    layers: Vec<Dense>,
    backbone_len: usize,
}

/// Per-layer activations of one forward pass, kept for backpropagation.
pub struct Forward {
    input: Array2<f64>,
    outputs: Vec<Array2<f64>>,
}

impl Forward {
    pub fn instance_output(&self) -> &Array2<f64> {
        &self.outputs[self.outputs.len() - 3]
    }

    pub fn cluster_output(&self) -> &Array2<f64> {
        &self.outputs[self.outputs.len() - 1]
    }
}

impl ToyEncoder {
    pub fn new(shape: &EncoderShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = seed::child_rng(seed, "encoder-init", &[]);
        let mut layers = Vec::new();
        let mut width = shape.input_dim;
        for &w in &shape.backbone {
            layers.push(Dense::random(width, w, Activation::Tanh, &mut rng));
            width = w;
        }
        let h = width;
        layers.push(Dense::random(h, shape.instance_hidden, Activation::Tanh, &mut rng));
        layers.push(Dense::random(
            shape.instance_hidden,
            shape.instance_dim,
            Activation::Identity,
            &mut rng,
        ));
        layers.push(Dense::random(h, shape.cluster_hidden, Activation::Tanh, &mut rng));
        layers.push(Dense::random(
            shape.cluster_hidden,
            shape.clusters,
            Activation::Softmax,
            &mut rng,
        ));
        Ok(Self {
            layers,
            backbone_len: shape.backbone.len(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn clusters(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn backbone_len(&self) -> usize {
        self.backbone_len
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
            backbone_len: self.backbone_len,
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} input features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Forward> {
        self.check_input(x)?;
        let b = self.backbone_len;
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers[..b] {
            let next = layer.forward(outputs.last().map_or(x, |o| o.view()));
            outputs.push(next);
        }
        let h = outputs[b - 1].clone();
        let inst_hidden = self.layers[b].forward(h.view());
        let inst_out = self.layers[b + 1].forward(inst_hidden.view());
        let clu_hidden = self.layers[b + 2].forward(h.view());
        let clu_out = self.layers[b + 3].forward(clu_hidden.view());
        outputs.extend([inst_hidden, inst_out, clu_hidden, clu_out]);
        Ok(Forward {
            input: x.to_owned(),
            outputs,
        })
    }

    /// Accumulates parameter gradients for one forward pass into `grads`,
    /// given gradients w.r.t. the instance and cluster outputs.
    pub fn backward(
        &self,
        fwd: &Forward,
        grad_instance: &Array2<f64>,
        grad_cluster: &Array2<f64>,
        grads: &mut ToyEncoder,
    ) {
        let b = self.backbone_len;
        let outs = &fwd.outputs;
        let h = &outs[b - 1];

        let mut grad_h = Array2::<f64>::zeros(h.dim());
        // Instance head: layers b (hidden), b+1 (output).
        let d = self.layer_backward(b + 1, &outs[b], &outs[b + 1], grad_instance.clone(), grads);
        let d = self.layer_backward(b, h, &outs[b], d, grads);
        grad_h += &d;
        // Cluster head: layers b+2 (hidden), b+3 (softmax output).
        let d = self.layer_backward(b + 3, &outs[b + 2], &outs[b + 3], grad_cluster.clone(), grads);
        let d = self.layer_backward(b + 2, h, &outs[b + 2], d, grads);
        grad_h += &d;

        let mut g = grad_h;
        for l in (0..b).rev() {
            let input = if l == 0 { &fwd.input } else { &outs[l - 1] };
            g = self.layer_backward(l, input, &outs[l], g, grads);
        }
    }

    /// Backpropagates through layer `l`; returns the gradient w.r.t. its input.
    fn layer_backward(
        &self,
        l: usize,
        input: &Array2<f64>,
        output: &Array2<f64>,
        grad_out: Array2<f64>,
        grads: &mut ToyEncoder,
    ) -> Array2<f64> {
        let layer = &self.layers[l];
        let dz = layer.activation.backward(output, grad_out);
        let g = &mut grads.layers[l];
        g.weight += &dz.t().dot(input);
        g.bias += &dz.sum_axis(Axis(0));
        dz.dot(&layer.weight)
    }

    /// Soft cluster assignments for clean inputs.
    pub fn cluster_probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.cluster_output().clone())
    }

    /// Argmax cluster of every row.
    pub fn predict_clusters(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let q = self.cluster_probabilities(x)?;
        Ok(q.rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }

    /// Representations of clean inputs from the last `backbone` backbone
    /// layers, the first `instance` instance-projector layers and the first
    /// `cluster` cluster-projector layers, with descriptive tags.
    pub fn extract_layers(
        &self,
        x: ArrayView2<'_, f64>,
        backbone: usize,
        instance: usize,
        cluster: usize,
    ) -> Result<Vec<(String, Array2<f64>)>> {
        let b = self.backbone_len;
        if backbone > b || instance > 2 || cluster > 2 {
            return Err(Error::invalid(format!(
                "cannot extract {backbone}/{instance}/{cluster} layers from a {b}-layer backbone"
            )));
        }
        let fwd = self.forward(x)?;
        let mut out = Vec::new();
        for l in b - backbone..b {
            out.push((format!("backbone:{l}"), fwd.outputs[l].clone()));
        }
        for l in 0..instance {
            out.push((format!("instance:{l}"), fwd.outputs[b + l].clone()));
        }
        for l in 0..cluster {
            out.push((format!("cluster:{l}"), fwd.outputs[b + 2 + l].clone()));
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All parameters flattened layer by layer (weights then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().expect("len"));
            l.bias.iter_mut().for_each(|w| *w = it.next().expect("len"));
        }
    }
}
