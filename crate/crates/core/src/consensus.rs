//! Entropy-based cluster weighting and the weighted-cluster bipartite
//! consensus.
//!
//! A cluster is reliable when the other ensemble members keep its samples
//! together. Its uncertainty with respect to one member is the base-2 entropy
//! of how its samples scatter over that member's clusters; summing over all
//! `M` members gives `H*`, and the cluster weight is `exp(-H* / M)`. Samples
//! and clusters then form a bipartite graph whose edges carry the weight of
//! the cluster end, and a transfer cut of that graph yields the consensus.

use rayon::prelude::*;

use crate::base::{tcut_partition_with, TcutOptions};
use crate::error::{Error, Result};
use crate::model::{BaseClustering, ClusterEnsemble, ConsensusResult};
use crate::sparse::CsrMatrix;

/// Entropy (bits) of the split of `cluster` over the clusters of `member`.
pub fn cluster_member_uncertainty(cluster: &[usize], member: &BaseClustering) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::invalid("cluster must be nonempty"));
    }
    let labels = member.labels();
    let mut counts = vec![0usize; member.k()];
    for &s in cluster {
        let Some(&l) = labels.get(s) else {
            return Err(Error::invalid(format!(
                "sample {s} out of range for a clustering of {} samples",
                labels.len()
            )));
        };
        counts[l] += 1;
    }
    let size = cluster.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / size;
            -p * p.log2()
        })
        .sum())
}

/// `H*`: the sum of per-member uncertainties over the whole ensemble.
pub fn cluster_total_uncertainty(cluster: &[usize], ensemble: &ClusterEnsemble) -> Result<f64> {
    ensemble
        .members()
        .iter()
        .map(|m| cluster_member_uncertainty(cluster, m))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWeights {
    pub uncertainty: Vec<f64>,
    pub weight: Vec<f64>,
}

impl ClusterWeights {
    /// Every cluster weighted 1, for the unweighted ablation.
    pub fn unit(ensemble: &ClusterEnsemble) -> Self {
        Self {
            uncertainty: vec![0.0; ensemble.n_clusters()],
            weight: vec![1.0; ensemble.n_clusters()],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }
}

pub fn weight_from_uncertainty(uncertainty: f64, n_members: usize) -> f64 {
    (-uncertainty / n_members as f64).exp()
}

pub fn compute_weights(ensemble: &ClusterEnsemble) -> Result<ClusterWeights> {
    let m = ensemble.n_members();
    let uncertainty = ensemble
        .catalog()
        .par_iter()
        .map(|c| cluster_total_uncertainty(&c.samples, ensemble))
        .collect::<Result<Vec<_>>>()?;
    let weight = uncertainty
        .iter()
        .map(|&h| weight_from_uncertainty(h, m))
        .collect();
    Ok(ClusterWeights {
        uncertainty,
        weight,
    })
}

/// Sample-to-cluster cross-affinity `B`: `b_ij = w(C_j)` when sample `i`
/// belongs to cluster `j`, else 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartiteGraph {
    pub cross_affinity: CsrMatrix,
    /// The weighting the graph was built from.
    pub weights: ClusterWeights,
}

impl WeightedBipartiteGraph {
    pub fn n_samples(&self) -> usize {
        self.cross_affinity.rows()
    }

    pub fn n_clusters(&self) -> usize {
        self.cross_affinity.cols()
    }
}

pub fn build_weighted_graph(
    ensemble: &ClusterEnsemble,
    weights: &ClusterWeights,
) -> Result<WeightedBipartiteGraph> {
    if weights.len() != ensemble.n_clusters() {
        return Err(Error::LengthMismatch {
            left: ensemble.n_clusters(),
            right: weights.len(),
        });
    }
    let rows = (0..ensemble.n_samples())
        .map(|i| {
            ensemble
                .members()
                .iter()
                .enumerate()
                .map(|(m, member)| {
                    let j = ensemble.global_index(m, member.labels()[i]);
                    (j, weights.weight[j])
                })
                .collect()
        })
        .collect();
    Ok(WeightedBipartiteGraph {
        cross_affinity: CsrMatrix::from_rows(ensemble.n_clusters(), rows)?,
        weights: weights.clone(),
    })
}

/// Transfer-cut partition of the weighted graph into `k` consensus clusters.
pub fn consensus_partition(
    graph: &WeightedBipartiteGraph,
    k: usize,
    seed: u64,
) -> Result<ConsensusResult> {
    consensus_partition_with(graph, k, seed, &TcutOptions::default())
}

pub fn consensus_partition_with(
    graph: &WeightedBipartiteGraph,
    k: usize,
    seed: u64,
    opts: &TcutOptions,
) -> Result<ConsensusResult> {
    let raw = tcut_partition_with(&graph.cross_affinity, k, seed, opts)?;
    let labels = BaseClustering::from_labels(&raw)?;
    Ok(ConsensusResult {
        k: labels.k(),
        labels: labels.labels().to_vec(),
        weights: graph.weights.weight.clone(),
        uncertainty: graph.weights.uncertainty.clone(),
    })
}
