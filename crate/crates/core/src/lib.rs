//! Multi-layer ensemble clustering.
//!
//! Per-layer feature matrices are turned into a diversified ensemble of
//! landmark spectral base clusterings, clusters are weighted by how
//! consistently the rest of the ensemble keeps their samples together, and
//! the weighted sample-cluster bipartite graph is partitioned into the
//! consensus. A toy contrastive engine provides the training objective that
//! produces such layered representations.

pub mod base;
pub mod config;
pub mod consensus;
pub mod contrastive;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod layers;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    build_catalog, validate_bundle, BaseClustering, CatalogCluster, ClusterEnsemble,
    ConsensusResult, FeatureMatrix, LayerBundle, ValidationReport, Violation,
};
