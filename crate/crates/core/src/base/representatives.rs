use ndarray::{Array2, Axis};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::model::FeatureMatrix;
use crate::seed;

/// Candidates kept per requested representative before k-means.
pub const DOWNSAMPLE_FACTOR: usize = 10;

/// `p` landmark points summarizing a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    points: Array2<f64>,
}

impl RepresentativeSet {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::invalid("need at least two representatives"));
        }
        if crate::model::first_non_finite(points.view()).is_some() {
            return Err(Error::invalid("representatives must be finite"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }
}

/// Hybrid selection: random down-sampling to `min(N, 10 p)` candidates,
/// then k-means with `p` centers on the candidates.
pub fn select_representatives(y: &FeatureMatrix, p: usize, seed: u64) -> Result<RepresentativeSet> {
    let n = y.rows();
    if p < 2 || p > n {
        return Err(Error::invalid(format!(
            "representative count must satisfy 2 <= p <= N, got p={p} N={n}"
        )));
    }
    let candidates = n.min(DOWNSAMPLE_FACTOR * p);
    let mut rng = seed::child_rng(seed, "downsample", &[]);
    let mut picked = index::sample(&mut rng, n, candidates).into_vec();
    picked.sort_unstable();
    let subset = y.view().select(Axis(0), &picked);
    let fit = kmeans(
        subset.view(),
        &KMeansConfig::new(p),
        seed::derive(seed, "rep-kmeans", &[]),
    )?;
    RepresentativeSet::new(fit.centers)
}
