//! Synthetic multi-view data: Gaussian blobs in a latent space observed
//! through several noisy random linear views, optionally including views
//! of pure noise.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{FeatureMatrix, LayerBundle};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub dim: usize,
    /// Std of the Gaussian noise added to the projected latent points.
    pub noise: f64,
    /// Ignore the latent points and emit standard Gaussian noise.
    pub pure_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub latent_dim: usize,
    /// Distance between every pair of blob centers; blobs have unit spread.
    /// Centers sit on a randomly rotated regular simplex, so `latent_dim`
    /// must be at least `k`.
    pub separation: f64,
    pub views: Vec<ViewSpec>,
    pub seed: u64,
}

impl SynthConfig {
    /// `lambda` views of increasing width sharing one noise level.
    pub fn uniform(n: usize, k: usize, lambda: usize, noise: f64, seed: u64) -> Self {
        let views = (0..lambda)
            .map(|j| ViewSpec {
                dim: 8 + 8 * j,
                noise,
                pure_noise: false,
            })
            .collect();
        Self {
            n,
            k,
            latent_dim: k.max(8),
            separation: 8.0,
            views,
            seed,
        }
    }

    /// The benchmark bundle: `lambda - 1` informative views whose noise
    /// grows from 2.0 to 3.5, plus a final two-dimensional pure-noise view
    /// (low-dimensional noise yields coherent, truth-independent partitions).
    pub fn with_noise_view(n: usize, k: usize, lambda: usize, seed: u64) -> Self {
        let mut cfg = Self::uniform(n, k, lambda, 0.0, seed);
        let informative = if lambda >= 2 { lambda - 1 } else { lambda };
        let steps = informative.saturating_sub(1).max(1) as f64;
        for (j, v) in cfg.views.iter_mut().take(informative).enumerate() {
            v.noise = 2.0 + 1.5 * j as f64 / steps;
        }
        if lambda >= 2 {
            let last = &mut cfg.views[lambda - 1];
            last.pure_noise = true;
            last.dim = 2;
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub bundle: LayerBundle,
    pub truth: Vec<usize>,
}

pub fn generate_synthetic_bundle(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.k < 2 || cfg.n < 5 * cfg.k {
        return Err(Error::invalid(format!(
            "need K >= 2 and N >= 5K, got N={} K={}",
            cfg.n, cfg.k
        )));
    }
    if cfg.views.is_empty() || cfg.views.iter().any(|v| v.dim == 0) {
        return Err(Error::invalid("views must be non-empty"));
    }
    if cfg.latent_dim < cfg.k {
        return Err(Error::invalid(format!(
            "latent dimension {} is below K={}",
            cfg.latent_dim, cfg.k
        )));
    }
    if cfg.views.iter().any(|v| !(v.noise >= 0.0)) || !(cfg.separation >= 0.0) {
        return Err(Error::invalid("noise and separation must be nonnegative"));
    }

    let mut rng = seed::child_rng(cfg.seed, "synth-latent", &[]);
    let mut truth: Vec<usize> = (0..cfg.n).map(|i| i * cfg.k / cfg.n).collect();
    truth.shuffle(&mut rng);
    let centers = simplex_centers(cfg.k, cfg.latent_dim, cfg.separation, &mut rng);
    let latent = Array2::from_shape_fn((cfg.n, cfg.latent_dim), |(i, j)| {
        let z: f64 = StandardNormal.sample(&mut rng);
        centers[(truth[i], j)] + z
    });

    let mut layers = Vec::with_capacity(cfg.views.len());
    let mut tags = Vec::with_capacity(cfg.views.len());
    for (v, view) in cfg.views.iter().enumerate() {
        let mut rng = seed::child_rng(cfg.seed, "synth-view", &[v as u64]);
        let data = if view.pure_noise {
            Array2::from_shape_fn((cfg.n, view.dim), |_| StandardNormal.sample(&mut rng))
        } else {
            let scale = (view.dim as f64 / cfg.latent_dim as f64).sqrt();
            let map = if cfg.latent_dim <= view.dim {
                orthonormal_rows(cfg.latent_dim, view.dim, &mut rng)
            } else {
                orthonormal_rows(view.dim, cfg.latent_dim, &mut rng).reversed_axes()
            };
            let mut y = latent.dot(&map) * scale;
            y.mapv_inplace(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + view.noise * z
            });
            y
        };
        layers.push(FeatureMatrix::new(data)?);
        tags.push(if view.pure_noise {
            format!("noise:{v}")
        } else {
            format!("view:{v}")
        });
    }
    Ok(SyntheticData {
        bundle: LayerBundle::new(layers, tags)?,
        truth,
    })
}

/// `rows x cols` matrix (`rows <= cols`) with orthonormal rows, by
/// Gram-Schmidt on Gaussian draws.
fn orthonormal_rows(rows: usize, cols: usize, rng: &mut seed::Rng) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((rows, cols));
    let mut i = 0;
    while i < rows {
        let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
        for j in 0..i {
            let dot: f64 = v.iter().zip(q.row(j)).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q.row(j)).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.row_mut(i).iter_mut().zip(&v).for_each(|(a, b)| *a = b / norm);
            i += 1;
        }
    }
    q
}

/// `k` points with all pairwise distances equal to `separation`: scaled,
/// centered orthonormal vectors.
fn simplex_centers(k: usize, dim: usize, separation: f64, rng: &mut seed::Rng) -> Array2<f64> {
    let mut q = orthonormal_rows(k, dim, rng);
    let mean = q.mean_axis(ndarray::Axis(0)).expect("k > 0");
    let scale = separation / std::f64::consts::SQRT_2;
    for mut row in q.rows_mut() {
        row.iter_mut().zip(&mean).for_each(|(a, m)| *a = (*a - m) * scale);
    }
    q
}

/// Writes `layer_XX.bin` files, `truth.txt` and `tags.txt` into `dir`.
/// Returns the layer file paths in order.
pub fn write_bundle(dir: &Path, bundle: &LayerBundle, truth: Option<&[usize]>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (i, layer) in bundle.layers().iter().enumerate() {
        let p = dir.join(format!("layer_{i:02}.bin"));
        io::write_matrix(&p, layer)?;
        paths.push(p);
    }
    let tags: String = bundle.tags().iter().map(|t| format!("{t}\n")).collect();
    fs::write(dir.join("tags.txt"), tags)?;
    if let Some(t) = truth {
        io::write_labels(dir.join("truth.txt"), t)?;
    }
    Ok(paths)
}
