//! Transfer cut: spectral partitioning of an `N x c` bipartite graph by
//! solving the eigenproblem on the small `c` side and transferring the
//! eigenvectors to the `N` samples.
//!
//! With `D_X = diag(B 1)`, `D_C = diag(B^T 1)` and `W_C = B^T D_X^-1 B`, the
//! small-side problem `W_C v = mu D_C v` is solved through the symmetric
//! matrix `D_C^-1/2 W_C D_C^-1/2`. An eigenvalue `gamma` of the full
//! bipartite problem `(D - W) f = gamma D f` corresponds to
//! `mu = (1 - gamma)^2`, and the sample half of its eigenvector is
//! `u = D_X^-1 B v / (1 - gamma)`. The `k` smallest `gamma < 1` are the `k`
//! largest `mu > 0`. Cost is linear in `N` and cubic in `c`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::sym_eigen;
use crate::sparse::CsrMatrix;

/// Eigenvalues `mu` below this are treated as `gamma == 1`.
const SINGULAR_TRANSFER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcutOptions {
    /// k-means restarts on the spectral embedding.
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for TcutOptions {
    fn default() -> Self {
        Self {
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
        }
    }
}

/// Partitions the rows of `b` into `k` clusters.
pub fn tcut_partition(b: &CsrMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    tcut_partition_with(b, k, seed, &TcutOptions::default())
}

pub fn tcut_partition_with(
    b: &CsrMatrix,
    k: usize,
    seed: u64,
    opts: &TcutOptions,
) -> Result<Vec<usize>> {
    let embedding = tcut_embedding(b, k)?;
    if k == 1 {
        return Ok(vec![0; b.rows()]);
    }
    let cfg = KMeansConfig {
        k,
        max_iter: opts.kmeans_max_iter,
        tol: 1e-6,
        n_init: opts.kmeans_restarts.max(1),
    };
    Ok(kmeans(embedding.view(), &cfg, seed)?.labels)
}

/// The row-normalized `N x k'` spectral embedding of the samples, where
/// `k' <= k` is the number of eigenvectors with a nonsingular transfer.
pub fn tcut_embedding(b: &CsrMatrix, k: usize) -> Result<Array2<f64>> {
    let n = b.rows();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > b.cols() {
        return Err(Error::invalid(format!(
            "k={k} exceeds the {} graph columns",
            b.cols()
        )));
    }
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds the {n} samples")));
    }
    let dx = b.row_sums();
    if let Some(i) = dx.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedRow(i));
    }

    // Columns without edges are isolated nodes and carry no information.
    let dc_full = b.col_sums();
    let mut compact = vec![usize::MAX; b.cols()];
    let mut active = 0;
    for (c, &d) in dc_full.iter().enumerate() {
        if d > 0.0 {
            compact[c] = active;
            active += 1;
        }
    }
    if k > active {
        return Err(Error::invalid(format!(
            "k={k} exceeds the {active} connected graph columns"
        )));
    }
    let dc: Vec<f64> = dc_full.iter().copied().filter(|&d| d > 0.0).collect();

    let mut wc = Array2::<f64>::zeros((active, active));
    let mut entries = Vec::new();
    for (r, &d) in dx.iter().enumerate() {
        entries.clear();
        entries.extend(b.row(r).map(|(c, v)| (compact[c], v)));
        for &(p, vp) in &entries {
            let scaled = vp / d;
            for &(q, vq) in &entries {
                wc[(p, q)] += scaled * vq;
            }
        }
    }
    let inv_sqrt: Vec<f64> = dc.iter().map(|d| 1.0 / d.sqrt()).collect();
    for ((p, q), w) in wc.indexed_iter_mut() {
        *w *= inv_sqrt[p] * inv_sqrt[q];
    }

    let eig = sym_eigen(wc.view());
    let chosen: Vec<usize> = (0..active)
        .filter(|&j| eig.values[j] > SINGULAR_TRANSFER)
        .take(k)
        .collect();

    // Small-side eigenvectors in the generalized (D_C-scaled) basis.
    let mut v = Array2::<f64>::zeros((active, chosen.len()));
    for (col, &j) in chosen.iter().enumerate() {
        for p in 0..active {
            v[(p, col)] = eig.vectors[(p, j)] * inv_sqrt[p];
        }
    }

    let width = chosen.len();
    let mut u = Array2::<f64>::zeros((n, width));
    for r in 0..n {
        let mut row = u.row_mut(r);
        for (c, val) in b.row(r) {
            let p = compact[c];
            for col in 0..width {
                row[col] += val * v[(p, col)];
            }
        }
        for (col, &j) in chosen.iter().enumerate() {
            row[col] /= dx[r] * eig.values[j].sqrt();
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
    Ok(u)
}
