//! Layer preparation: layers wider than a threshold are PCA-reduced before
//! ensemble generation.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sign_of_largest, sym_eigen};
use crate::model::{FeatureMatrix, LayerBundle};

/// Which layers a network contributes, and when to reduce them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSelection {
    pub backbone: usize,
    pub instance: usize,
    pub cluster: usize,
    pub dim_threshold: usize,
    pub target_dim: usize,
}

impl Default for LayerSelection {
    fn default() -> Self {
        Self {
            backbone: 3,
            instance: 2,
            cluster: 1,
            dim_threshold: 1000,
            target_dim: 1000,
        }
    }
}

impl LayerSelection {
    pub fn total(&self) -> usize {
        self.backbone + self.instance + self.cluster
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::invalid("layer selection must pick at least one layer"));
        }
        if self.target_dim == 0 || self.target_dim > self.dim_threshold {
            return Err(Error::invalid(format!(
                "PCA target dimension {} must be in 1..={}",
                self.target_dim, self.dim_threshold
            )));
        }
        Ok(())
    }
}

/// A fitted principal-component projection.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `d x r` orthonormal directions, by descending variance.
    pub components: Array2<f64>,
    /// Variance along each retained direction.
    pub explained_variance: Array1<f64>,
    /// Sum of all column variances.
    pub total_variance: f64,
}

impl Pca {
    /// Mean-centers `y` and fits up to `min(target_dim, d, N - 1)` components.
    /// Uses the `d x d` covariance when `d <= N` and the `N x N` Gram matrix
    /// otherwise.
    pub fn fit(y: &FeatureMatrix, target_dim: usize) -> Result<Self> {
        let (n, d) = (y.rows(), y.cols());
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two samples"));
        }
        if target_dim == 0 {
            return Err(Error::invalid("PCA target dimension must be positive"));
        }
        let mean = y.view().mean_axis(Axis(0)).expect("nonempty");
        let centered = &y.view() - &mean;
        let r = target_dim.min(d).min(n - 1);
        let scale = 1.0 / (n - 1) as f64;

        let (explained_variance, components) = if d <= n {
            let cov = centered.t().dot(&centered) * scale;
            let eig = sym_eigen(cov.view());
            let comps = eig.vectors.slice(ndarray::s![.., ..r]).to_owned();
            let vals = eig.values.slice(ndarray::s![..r]).mapv(|v| v.max(0.0));
            (vals, comps)
        } else {
            let gram = centered.dot(&centered.t()) * scale;
            let eig = sym_eigen(gram.view());
            let floor = eig.values[0].max(0.0) * 1e-12;
            let mut comps = Array2::zeros((d, r));
            for j in 0..r {
                let lambda = eig.values[j];
                if lambda <= floor {
                    continue;
                }
                // v = Xc^T u / sqrt((N-1) lambda)
                let u = eig.vectors.column(j);
                let v = centered.t().dot(&u) / ((n - 1) as f64 * lambda).sqrt();
                let sign = sign_of_largest(v.iter().copied());
                comps.column_mut(j).assign(&(v * sign));
            }
            let vals = eig.values.slice(ndarray::s![..r]).mapv(|v| v.max(0.0));
            (vals, comps)
        };
        let total_variance = centered.mapv(|x| x * x).sum() * scale;
        Ok(Self {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn transform(&self, y: &FeatureMatrix) -> Result<FeatureMatrix> {
        if y.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "PCA fitted on {} features, got {}",
                self.mean.len(),
                y.cols()
            )));
        }
        FeatureMatrix::new((&y.view() - &self.mean).dot(&self.components))
    }

    /// Fraction of total variance along the retained directions.
    pub fn retained_variance(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        self.explained_variance.sum() / self.total_variance
    }
}

/// Projects `y` onto its leading principal directions.
pub fn pca_reduce(y: &FeatureMatrix, target_dim: usize) -> Result<FeatureMatrix> {
    Pca::fit(y, target_dim)?.transform(y)
}

/// Reduces every layer wider than `sel.dim_threshold` to `sel.target_dim`
/// dimensions; other layers pass through untouched.
pub fn prepare_bundle(raw: &LayerBundle, sel: &LayerSelection) -> Result<LayerBundle> {
    sel.validate()?;
    let layers = raw
        .layers()
        .par_iter()
        .map(|layer| {
            if layer.cols() > sel.dim_threshold {
                pca_reduce(layer, sel.target_dim)
            } else {
                Ok(layer.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LayerBundle::new(layers, raw.tags().to_vec())
}
