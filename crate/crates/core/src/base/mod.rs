//! Base clusterer: landmark bipartite spectral clustering with randomized
//! cluster counts, used to build a diversified ensemble from every layer.
//!
//! One base clustering is produced in three steps: hybrid representative
//! selection ([`select_representatives`]), a sparse sample-representative
//! k-NN graph ([`build_sample_rep_graph`]), and a transfer cut of that graph
//! ([`tcut_partition`]). Diversity comes from the random down-sampling inside
//! representative selection and from drawing each member's cluster count
//! uniformly from `[k_min, k_max]`.

mod graph;
mod representatives;
mod tcut;

use rand::Rng as _;
use rayon::prelude::*;

pub use graph::{build_sample_rep_graph, KnnOptions, SampleRepGraph};
pub use representatives::{select_representatives, RepresentativeSet, DOWNSAMPLE_FACTOR};
pub use tcut::{tcut_embedding, tcut_partition, tcut_partition_with, TcutOptions};

use crate::error::{Error, Result};
use crate::model::{build_catalog, BaseClustering, ClusterEnsemble, FeatureMatrix, LayerBundle};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// Base clusterings per layer.
    pub m_prime: usize,
    /// Lower end of the cluster-count range, normally the target `K`.
    pub k_min: usize,
    /// Upper end of the range; `floor(sqrt(N))` when unset.
    pub k_max: Option<usize>,
    /// Representative count; [`default_representatives`] when unset.
    pub representatives: Option<usize>,
    pub knn_k: usize,
    pub probe_groups: usize,
    pub tcut: TcutOptions,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(k_min: usize, seed: u64) -> Self {
        Self {
            m_prime: 5,
            k_min,
            k_max: None,
            representatives: None,
            knn_k: 5,
            probe_groups: 2,
            tcut: TcutOptions::default(),
            seed,
        }
    }

    /// Inclusive cluster-count range for `n` samples.
    pub fn k_range(&self, n: usize) -> (usize, usize) {
        let hi = self.k_max.unwrap_or_else(|| isqrt(n));
        (self.k_min, hi.max(self.k_min))
    }

    pub fn representatives_for(&self, n: usize) -> usize {
        self.representatives
            .unwrap_or_else(|| default_representatives(n))
            .min(n)
    }
}

/// `min(ceil(2 sqrt(N)), 1000, N)`.
pub fn default_representatives(n: usize) -> usize {
    let p = (2.0 * (n as f64).sqrt()).ceil() as usize;
    p.min(1000).min(n)
}

pub(crate) fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// One landmark spectral clustering of `y` into `k_target` clusters.
pub fn generate_base_clustering(
    y: &FeatureMatrix,
    k_target: usize,
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<BaseClustering> {
    let n = y.rows();
    let p = cfg.representatives_for(n);
    if k_target < 2 || k_target > p {
        return Err(Error::invalid(format!(
            "cluster count must satisfy 2 <= k <= p, got k={k_target} p={p}"
        )));
    }
    let reps = select_representatives(y, p, seed::derive(seed, "representatives", &[]))?;
    let knn = KnnOptions {
        k: cfg.knn_k.min(p),
        probe_groups: cfg.probe_groups,
    };
    let graph = build_sample_rep_graph(y, &reps, knn, seed::derive(seed, "rep-groups", &[]))?;
    let labels = tcut_partition_with(
        &graph.affinity,
        k_target,
        seed::derive(seed, "tcut", &[]),
        &cfg.tcut,
    )?;
    BaseClustering::from_labels(&labels)
}

/// Cluster counts drawn for each layer: `draws[layer][member]`.
pub fn draw_cluster_counts(n_layers: usize, n: usize, cfg: &EnsembleConfig) -> Vec<Vec<usize>> {
    let (lo, hi) = cfg.k_range(n);
    let hi = hi.min(cfg.representatives_for(n)).max(lo);
    (0..n_layers)
        .map(|layer| {
            let mut rng = seed::child_rng(cfg.seed, "cluster-counts", &[layer as u64]);
            (0..cfg.m_prime).map(|_| rng.random_range(lo..=hi)).collect()
        })
        .collect()
}

/// `M = lambda * M'` base clusterings, ordered layer by layer. Members are
/// generated in parallel; each has its own seed derived from
/// `(cfg.seed, layer, member)` so output is independent of scheduling.
pub fn generate_ensemble(bundle: &LayerBundle, cfg: &EnsembleConfig) -> Result<ClusterEnsemble> {
    if cfg.m_prime == 0 {
        return Err(Error::invalid("m_prime must be at least 1"));
    }
    let n = bundle.n_samples();
    let draws = draw_cluster_counts(bundle.n_layers(), n, cfg);
    let tasks: Vec<(usize, usize, usize)> = draws
        .iter()
        .enumerate()
        .flat_map(|(l, ks)| ks.iter().enumerate().map(move |(m, &k)| (l, m, k)))
        .collect();
    let members = tasks
        .par_iter()
        .map(|&(l, m, k)| {
            let s = seed::derive(cfg.seed, "member", &[l as u64, m as u64]);
            generate_base_clustering(bundle.layer(l), k, cfg, s)
        })
        .collect::<Result<Vec<_>>>()?;
    build_catalog(members)
}
