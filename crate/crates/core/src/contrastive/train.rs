use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::encoder::{EncoderShape, ToyEncoder};
use super::loss::{total_loss_with_grad, LossBreakdown, LossConfig, LossTerms, ProjectedBatch};
use crate::error::{Error, Result};
use crate::model::FeatureMatrix;
use crate::seed::{self, Rng};

/// Two-view vector augmentation: additive Gaussian noise scaled by each
/// feature's standard deviation, then random coordinate masking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmenter {
    /// Noise standard deviation as a fraction of the feature's std.
    pub noise: f64,
    /// Probability of zeroing each coordinate.
    pub mask_rate: f64,
}

impl Default for Augmenter {
    fn default() -> Self {
        Self {
            noise: 0.1,
            mask_rate: 0.1,
        }
    }
}

impl Augmenter {
    pub const NONE: Self = Self {
        noise: 0.0,
        mask_rate: 0.0,
    };

    pub fn augment(&self, x: ArrayView2<'_, f64>, feature_std: ArrayView1<'_, f64>, rng: &mut Rng) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (v, &s) in row.iter_mut().zip(feature_std.iter()) {
                let z: f64 = StandardNormal.sample(rng);
                *v += self.noise * s * z;
                if rng.random::<f64>() < self.mask_rate {
                    *v = 0.0;
                }
            }
        }
        out
    }

    pub fn views(&self, x: ArrayView2<'_, f64>, feature_std: ArrayView1<'_, f64>, rng: &mut Rng) -> (Array2<f64>, Array2<f64>) {
        let a = self.augment(x, feature_std, rng);
        let b = self.augment(x, feature_std, rng);
        (a, b)
    }
}

pub fn feature_std(x: ArrayView2<'_, f64>) -> Array1<f64> {
    if x.nrows() < 2 {
        return Array1::zeros(x.ncols());
    }
    x.std_axis(Axis(0), 1.0)
}

/// Objective value and parameter gradient for two already-augmented views.
pub fn loss_and_gradient(
    encoder: &ToyEncoder,
    view_a: ArrayView2<'_, f64>,
    view_b: ArrayView2<'_, f64>,
    cfg: &LossConfig,
    terms: LossTerms,
) -> Result<(LossBreakdown, ToyEncoder)> {
    if view_a.dim() != view_b.dim() {
        return Err(Error::Shape("augmented views differ in shape".into()));
    }
    let fa = encoder.forward(view_a)?;
    let fb = encoder.forward(view_b)?;
    let batch = ProjectedBatch {
        pa: fa.instance_output().clone(),
        pb: fb.instance_output().clone(),
        da: fa.cluster_output().clone(),
        db: fb.cluster_output().clone(),
    };
    let (breakdown, g) = total_loss_with_grad(&batch, cfg, terms)?;
    let mut grads = encoder.zeros_like();
    encoder.backward(&fa, &g.pa, &g.da, &mut grads);
    encoder.backward(&fb, &g.pb, &g.db, &mut grads);
    Ok((breakdown, grads))
}

/// Objective value only, for two already-augmented views.
pub fn loss_value(
    encoder: &ToyEncoder,
    view_a: ArrayView2<'_, f64>,
    view_b: ArrayView2<'_, f64>,
    cfg: &LossConfig,
    terms: LossTerms,
) -> Result<LossBreakdown> {
    let fa = encoder.forward(view_a)?;
    let fb = encoder.forward(view_b)?;
    let batch = ProjectedBatch {
        pa: fa.instance_output().clone(),
        pb: fb.instance_output().clone(),
        da: fa.cluster_output().clone(),
        db: fb.cluster_output().clone(),
    };
    Ok(total_loss_with_grad(&batch, cfg, terms)?.0)
}

/// Draws two augmented views of `raw` (noise scaled by the batch's feature
/// std) and returns the full objective's parameter gradient.
pub fn loss_gradient(
    encoder: &ToyEncoder,
    raw: ArrayView2<'_, f64>,
    augmenter: &Augmenter,
    cfg: &LossConfig,
    seed: u64,
) -> Result<(LossBreakdown, ToyEncoder)> {
    if raw.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if raw.ncols() != encoder.input_dim() {
        return Err(Error::Shape(format!(
            "encoder expects {} input features, got {}",
            encoder.input_dim(),
            raw.ncols()
        )));
    }
    let std = feature_std(raw);
    let mut rng = seed::rng(seed);
    let (a, b) = augmenter.views(raw, std.view(), &mut rng);
    loss_and_gradient(encoder, a.view(), b.view(), cfg, LossTerms::ALL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub clusters: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub augmenter: Augmenter,
    /// Layer widths; [`EncoderShape::new`] for the data width when unset.
    pub shape: Option<EncoderShape>,
}

impl TrainConfig {
    pub fn new(clusters: usize, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            clusters,
            epochs,
            batch_size,
            learning_rate: 1e-3,
            seed,
            loss: LossConfig::default(),
            augmenter: Augmenter::default(),
            shape: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: ToyEncoder,
    /// Mean mini-batch objective of every epoch.
    pub loss_trace: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(size: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on the full objective. Every epoch reshuffles the data and
/// draws fresh augmentations; the whole run is a function of `cfg.seed`.
pub fn train_toy(dataset: &FeatureMatrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let n = dataset.rows();
    if cfg.batch_size < 2 {
        return Err(Error::invalid("batch size must be at least 2"));
    }
    if n < cfg.batch_size {
        return Err(Error::invalid(format!(
            "dataset of {n} samples is smaller than the batch size {}",
            cfg.batch_size
        )));
    }
    cfg.loss.validate()?;
    let shape = cfg
        .shape
        .clone()
        .unwrap_or_else(|| EncoderShape::new(dataset.cols(), cfg.clusters));
    if shape.input_dim != dataset.cols() || shape.clusters != cfg.clusters {
        return Err(Error::Shape("encoder shape does not match the dataset".into()));
    }
    let mut encoder = ToyEncoder::new(&shape, seed::derive(cfg.seed, "init", &[]))?;
    let std = feature_std(dataset.view());
    let mut params = encoder.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = seed::child_rng(cfg.seed, "epoch", &[epoch as u64]);
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = dataset.view().select(Axis(0), chunk);
            let (a, b) = cfg.augmenter.views(x.view(), std.view(), &mut rng);
            let (loss, grads) = loss_and_gradient(&encoder, a.view(), b.view(), &cfg.loss, LossTerms::ALL)?;
            adam.step(&mut params, &grads.params());
            encoder.set_params(&params);
            sum += loss.total;
            batches += 1;
        }
        loss_trace.push(sum / batches as f64);
    }
    Ok(TrainOutcome {
        encoder,
        loss_trace,
    })
}
