//! Domain types shared by every pipeline stage.
//!
//! All types here are immutable once built. Constructors validate their
//! invariants, so downstream code can rely on finite features, dense cluster
//! ids and consistent sample counts without re-checking.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// An `N x d` matrix of finite features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "feature matrix must be non-empty, got {n}x{d}"
            )));
        }
        if let Some((row, col)) = first_non_finite(data.view()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

pub(crate) fn first_non_finite(m: ArrayView2<'_, f64>) -> Option<(usize, usize)> {
    m.indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(idx, _)| idx)
}

/// One problem found by [`validate_bundle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub layer: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer {}: {}", self.layer, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a set of raw layer matrices for a common row count and finite
/// entries. Layers are compared against layer 0.
pub fn validate_bundle(layers: &[ArrayView2<'_, f64>]) -> ValidationReport {
    let mut violations = Vec::new();
    if layers.is_empty() {
        violations.push(Violation {
            layer: 0,
            reason: "bundle has no layers".into(),
        });
        return ValidationReport { violations };
    }
    let n = layers[0].nrows();
    for (idx, layer) in layers.iter().enumerate() {
        if layer.nrows() == 0 || layer.ncols() == 0 {
            violations.push(Violation {
                layer: idx,
                reason: format!("empty layer ({}x{})", layer.nrows(), layer.ncols()),
            });
        }
        if layer.nrows() != n {
            violations.push(Violation {
                layer: idx,
                reason: format!(
                    "row count mismatch at layer {idx} ({} rows, expected {n})",
                    layer.nrows()
                ),
            });
        }
        if let Some((row, col)) = first_non_finite(*layer) {
            violations.push(Violation {
                layer: idx,
                reason: format!("non-finite entry at row {row}, column {col}"),
            });
        }
    }
    ValidationReport { violations }
}

/// The ordered per-layer representations of one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBundle {
    layers: Vec<FeatureMatrix>,
    tags: Vec<String>,
}

impl LayerBundle {
    pub fn new(layers: Vec<FeatureMatrix>, tags: Vec<String>) -> Result<Self> {
        if tags.len() != layers.len() {
            return Err(Error::Shape(format!(
                "{} layers but {} tags",
                layers.len(),
                tags.len()
            )));
        }
        let views: Vec<_> = layers.iter().map(|l| l.view()).collect();
        let report = validate_bundle(&views);
        if let Some(v) = report.violations.first() {
            return Err(Error::Shape(v.to_string()));
        }
        Ok(Self { layers, tags })
    }

    /// Builds a bundle with tags `layer0`, `layer1`, ...
    pub fn untagged(layers: Vec<FeatureMatrix>) -> Result<Self> {
        let tags = (0..layers.len()).map(|i| format!("layer{i}")).collect();
        Self::new(layers, tags)
    }

    pub fn n_samples(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[FeatureMatrix] {
        &self.layers
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn layer(&self, i: usize) -> &FeatureMatrix {
        &self.layers[i]
    }

    pub fn into_parts(self) -> (Vec<FeatureMatrix>, Vec<String>) {
        (self.layers, self.tags)
    }
}

/// A hard partition of `N` samples into `k` nonempty clusters with dense ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaseClustering {
    labels: Vec<usize>,
    k: usize,
}

impl BaseClustering {
    /// Builds a clustering from arbitrary ids. Ids are compacted to
    /// `0..k` preserving their sorted order, so gaps and unused ids vanish.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Shape("clustering must cover at least one sample".into()));
        }
        let (dense, k) = densify(labels);
        Ok(Self { labels: dense, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample indices of every cluster, in local id order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }
}

/// Maps arbitrary ids onto `0..k` in ascending id order.
pub fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dense = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("id present"))
        .collect();
    (dense, ids.len())
}

/// One entry of the flattened cluster catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogCluster {
    pub samples: Vec<usize>,
    pub member: usize,
    pub local: usize,
}

/// `M` base clusterings together with the flat catalog of all their clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEnsemble {
    members: Vec<BaseClustering>,
    catalog: Vec<CatalogCluster>,
    offsets: Vec<usize>,
}

impl ClusterEnsemble {
    pub fn members(&self) -> &[BaseClustering] {
        &self.members
    }

    pub fn catalog(&self) -> &[CatalogCluster] {
        &self.catalog
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_samples(&self) -> usize {
        self.members[0].len()
    }

    /// Total cluster count `k_c`.
    pub fn n_clusters(&self) -> usize {
        self.catalog.len()
    }

    /// Catalog index of `member`'s local cluster `local`.
    pub fn global_index(&self, member: usize, local: usize) -> usize {
        self.offsets[member] + local
    }

    /// Rebuilds each member's label vector from the catalog alone.
    pub fn reconstruct_members(&self) -> Vec<Vec<usize>> {
        let n = self.n_samples();
        let mut out = vec![vec![usize::MAX; n]; self.members.len()];
        for c in &self.catalog {
            for &s in &c.samples {
                out[c.member][s] = c.local;
            }
        }
        out
    }
}

/// Flattens `members` into a cluster catalog, member by member in local id order.
pub fn build_catalog(members: Vec<BaseClustering>) -> Result<ClusterEnsemble> {
    let Some(first) = members.first() else {
        return Err(Error::invalid("ensemble needs at least one member"));
    };
    let n = first.len();
    if let Some(bad) = members.iter().find(|m| m.len() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: bad.len(),
        });
    }
    let mut catalog = Vec::with_capacity(members.iter().map(|m| m.k()).sum());
    let mut offsets = Vec::with_capacity(members.len());
    for (m, member) in members.iter().enumerate() {
        offsets.push(catalog.len());
        for (local, samples) in member.clusters().into_iter().enumerate() {
            catalog.push(CatalogCluster {
                samples,
                member: m,
                local,
            });
        }
    }
    Ok(ClusterEnsemble {
        members,
        catalog,
        offsets,
    })
}

/// The final partition with the weighting it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Per-catalog-cluster weight `w`.
    pub weights: Vec<f64>,
    /// Per-catalog-cluster ensemble uncertainty `H*`.
    pub uncertainty: Vec<f64>,
}
