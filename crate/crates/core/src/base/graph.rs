use rayon::prelude::*;

use super::representatives::RepresentativeSet;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::sq_dist_slice;
use crate::model::FeatureMatrix;
use crate::sparse::CsrMatrix;

/// Sparse sample-to-representative affinities, `k` entries per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRepGraph {
    pub affinity: CsrMatrix,
    pub k: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnOptions {
    pub k: usize,
    /// Nearest representative groups searched exactly per sample.
    pub probe_groups: usize,
}

impl KnnOptions {
    pub fn new(k: usize) -> Self {
        Self { k, probe_groups: 2 }
    }
}

/// Connects every sample to its `k` (approximately) nearest representatives
/// with Gaussian affinities `exp(-d^2 / (2 sigma^2))`, where `sigma` is the
/// mean retained sample-representative distance.
///
/// Neighbors are found in two stages: representatives are grouped into
/// `ceil(sqrt(p))` groups by k-means, each sample is matched to its nearest
/// `probe_groups` group centers, and the union of those groups is searched
/// exactly. When the union holds fewer than `k` representatives the search
/// falls back to all of them.
pub fn build_sample_rep_graph(
    y: &FeatureMatrix,
    reps: &RepresentativeSet,
    opts: KnnOptions,
    seed: u64,
) -> Result<SampleRepGraph> {
    let p = reps.len();
    let k = opts.k;
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "neighbor count must satisfy 1 <= k <= p, got k={k} p={p}"
        )));
    }
    if y.cols() != reps.points().ncols() {
        return Err(Error::Shape(format!(
            "samples have {} features, representatives {}",
            y.cols(),
            reps.points().ncols()
        )));
    }
    let d = y.cols();
    let rep_points = reps.points().as_standard_layout();
    let rep_slice = rep_points.as_slice().expect("standard layout");
    let rep_row = |r: usize| &rep_slice[r * d..(r + 1) * d];

    let n_groups = (p as f64).sqrt().ceil() as usize;
    let grouping = if k < p && n_groups >= 2 && opts.probe_groups < n_groups {
        let fit = kmeans(rep_points.view(), &KMeansConfig::new(n_groups), seed)?;
        let mut members = vec![Vec::new(); n_groups];
        for (r, &g) in fit.labels.iter().enumerate() {
            members[g].push(r);
        }
        Some((fit.centers, members))
    } else {
        None
    };

    let samples = y.view().as_standard_layout().into_owned();
    let sample_slice = samples.as_slice().expect("standard layout");

    let neighbors: Vec<Vec<(usize, f64)>> = sample_slice
        .par_chunks_exact(d)
        .map(|x| {
            let mut candidates: Vec<usize> = match &grouping {
                Some((centers, members)) => {
                    let mut order: Vec<(f64, usize)> = centers
                        .rows()
                        .into_iter()
                        .enumerate()
                        .map(|(g, c)| (sq_dist_slice(x, c.as_slice().expect("row")), g))
                        .collect();
                    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    order
                        .iter()
                        .take(opts.probe_groups.max(1))
                        .flat_map(|&(_, g)| members[g].iter().copied())
                        .collect()
                }
                None => (0..p).collect(),
            };
            if candidates.len() < k {
                candidates = (0..p).collect();
            }
            let mut scored: Vec<(f64, usize)> = candidates
                .into_iter()
                .map(|r| (sq_dist_slice(x, rep_row(r)), r))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored
                .into_iter()
                .take(k)
                .map(|(dist2, r)| (r, dist2.sqrt()))
                .collect()
        })
        .collect();

    let count = (neighbors.len() * k) as f64;
    let mut sigma = neighbors.iter().flatten().map(|&(_, dist)| dist).sum::<f64>() / count;
    if sigma <= 0.0 || !sigma.is_finite() {
        sigma = 1.0;
    }
    let denom = 2.0 * sigma * sigma;
    let rows = neighbors
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(r, dist)| (r, (-(dist * dist) / denom).exp().max(f64::MIN_POSITIVE)))
                .collect()
        })
        .collect();
    Ok(SampleRepGraph {
        affinity: CsrMatrix::from_rows(p, rows)?,
        k,
        sigma,
    })
}
