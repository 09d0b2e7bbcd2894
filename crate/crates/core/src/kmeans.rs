//! Seeded Lloyd k-means with k-means++ initialization.
//!
//! Used for representative selection, for the spectral embedding inside the
//! transfer cut, and for the single-layer baselines.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::sq_dist_slice;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the total center shift falls below `tol` times the
    /// total center norm.
    pub tol: f64,
    /// Independent restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 100,
            tol: 1e-6,
            n_init: 1,
        }
    }

    pub fn n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init.max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    /// Sum of squared distances to assigned centers.
    pub inertia: f64,
    pub iterations: usize,
}

pub fn kmeans(data: ArrayView2<'_, f64>, cfg: &KMeansConfig, seed: u64) -> Result<KMeansFit> {
    let n = data.nrows();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= N, got k={} N={n}",
            cfg.k
        )));
    }
    let data = data.as_standard_layout();
    let points = data.as_slice().expect("standard layout");
    let d = data.ncols();
    let mut best: Option<KMeansFit> = None;
    for run in 0..cfg.n_init.max(1) {
        let mut rng = seed::child_rng(seed, "kmeans", &[run as u64]);
        let fit = lloyd(points, n, d, cfg, &mut rng);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one run"))
}

fn lloyd(points: &[f64], n: usize, d: usize, cfg: &KMeansConfig, rng: &mut Rng) -> KMeansFit {
    let k = cfg.k;
    let mut centers = plus_plus_init(points, n, d, k, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        assign(points, d, &centers, &mut labels, &mut dists);
        repair_empty(points, d, &mut centers, &mut labels, &mut dists, k);
        let updated = recompute_centers(points, d, &labels, &centers, k);
        let shift: f64 = sq_dist_slice(&updated, &centers);
        let scale: f64 = centers.iter().map(|c| c * c).sum();
        centers = updated;
        if shift.sqrt() <= cfg.tol * scale.sqrt().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    assign(points, d, &centers, &mut labels, &mut dists);
    repair_empty(points, d, &mut centers, &mut labels, &mut dists, k);
    let inertia = dists.iter().sum();
    KMeansFit {
        centers: Array2::from_shape_vec((k, d), centers).expect("shape"),
        labels,
        inertia,
        iterations,
    }
}

fn plus_plus_init(points: &[f64], n: usize, d: usize, k: usize, rng: &mut Rng) -> Vec<f64> {
    let row = |i: usize| &points[i * d..(i + 1) * d];
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist_slice(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, best) in nearest.iter_mut().enumerate() {
            let dist = sq_dist_slice(row(i), &c);
            if dist < *best {
                *best = dist;
            }
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Nearest-center assignment; ties go to the lower center index.
pub(crate) fn assign(
    points: &[f64],
    d: usize,
    centers: &[f64],
    labels: &mut [usize],
    dists: &mut [f64],
) {
    for (i, p) in points.chunks_exact(d).enumerate() {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (c, center) in centers.chunks_exact(d).enumerate() {
            let dist = sq_dist_slice(p, center);
            if dist < best {
                best = dist;
                arg = c;
            }
        }
        labels[i] = arg;
        dists[i] = best;
    }
}

fn recompute_centers(points: &[f64], d: usize, labels: &[usize], old: &[f64], k: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.chunks_exact(d).zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..k {
        let slot = &mut sums[c * d..(c + 1) * d];
        if counts[c] == 0 {
            slot.copy_from_slice(&old[c * d..(c + 1) * d]);
        } else {
            let inv = 1.0 / counts[c] as f64;
            slot.iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

/// Re-seeds each empty cluster at the point farthest from its center and
/// reassigns once. Clusters that are still empty (duplicate points) take a
/// point from the largest cluster so the output always has `k` nonempty
/// clusters.
fn repair_empty(
    points: &[f64],
    d: usize,
    centers: &mut [f64],
    labels: &mut [usize],
    dists: &mut [f64],
    k: usize,
) {
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut taken = vec![false; labels.len()];
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| !taken[i] && counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        if let Some(i) = far {
            taken[i] = true;
            counts[labels[i]] -= 1;
            counts[c] += 1;
            centers[c * d..(c + 1) * d].copy_from_slice(&points[i * d..(i + 1) * d]);
        }
    }
    assign(points, d, centers, labels, dists);

    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let largest = (0..k).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).expect("k>0");
        if counts[largest] < 2 {
            break;
        }
        let i = (0..labels.len())
            .rev()
            .find(|&i| labels[i] == largest)
            .expect("nonempty");
        labels[i] = c;
        counts[largest] -= 1;
        counts[c] += 1;
        dists[i] = sq_dist_slice(&points[i * d..(i + 1) * d], &centers[c * d..(c + 1) * d]);
    }
}
