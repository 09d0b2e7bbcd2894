//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// `k` unit-variance blobs with centers drawn at scale `spread`, cycling
/// labels `i % k`.
pub fn blobs(n: usize, k: usize, d: usize, spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let centers = gaussian(k, d, &mut r) * spread;
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let z: f64 = StandardNormal.sample(&mut r);
        centers[(labels[i], j)] + z
    });
    (x, labels)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvalues
/// descending, eigenvectors in columns.
pub fn jacobi_eigen(a: ArrayView2<'_, f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[(r, order[c])]);
    (values, vectors)
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Plain Lloyd k-means with k-means++ seeding and restarts; returns the
/// labels of the lowest-inertia run.
pub fn reference_kmeans(x: ArrayView2<'_, f64>, k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut r = rng(seed);
    let mut best = (f64::INFINITY, vec![0; n]);
    for _ in 0..restarts {
        let mut centers = vec![rows[r.random_range(0..n)].clone()];
        while centers.len() < k {
            let d: Vec<f64> = rows
                .iter()
                .map(|p| centers.iter().map(|c| sq(p, c)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d.iter().sum();
            let mut t = r.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            centers.push(rows[pick].clone());
        }
        let mut labels = vec![0; n];
        for _ in 0..300 {
            for (i, p) in rows.iter().enumerate() {
                labels[i] = (0..k)
                    .min_by(|&a, &b| sq(p, &centers[a]).partial_cmp(&sq(p, &centers[b])).unwrap())
                    .unwrap();
            }
            let mut next = vec![vec![0.0; x.ncols()]; k];
            let mut counts = vec![0usize; k];
            for (p, &l) in rows.iter().zip(&labels) {
                counts[l] += 1;
                next[l].iter_mut().zip(p).for_each(|(a, b)| *a += b);
            }
            let mut moved = false;
            for c in 0..k {
                if counts[c] > 0 {
                    next[c].iter_mut().for_each(|a| *a /= counts[c] as f64);
                } else {
                    next[c] = centers[c].clone();
                }
                if sq(&next[c], &centers[c]) > 1e-20 {
                    moved = true;
                }
            }
            centers = next;
            if !moved {
                break;
            }
        }
        let inertia: f64 = rows.iter().zip(&labels).map(|(p, &l)| sq(p, &centers[l])).sum();
        if inertia < best.0 {
            best = (inertia, labels);
        }
    }
    best.1
}

/// Normalized spectral clustering of the full `(N + c)` bipartite graph
/// with adjacency `[[0, B], [B^T, 0]]`: the `k` leading eigenvectors of
/// `D^-1/2 A D^-1/2` whose eigenvalue is below 1 in magnitude of the
/// mirrored pair, row-normalized over the sample nodes, then k-means.
pub fn full_bipartite_spectral(b: ArrayView2<'_, f64>, k: usize, seed: u64) -> Vec<usize> {
    let (n, c) = b.dim();
    let active: Vec<usize> = (0..c).filter(|&j| b.column(j).sum() > 0.0).collect();
    let size = n + active.len();
    let mut a = Array2::<f64>::zeros((size, size));
    for i in 0..n {
        for (jj, &j) in active.iter().enumerate() {
            a[(i, n + jj)] = b[(i, j)];
            a[(n + jj, i)] = b[(i, j)];
        }
    }
    let deg: Array1<f64> = a.sum_axis(ndarray::Axis(1));
    let s = Array2::from_shape_fn((size, size), |(i, j)| a[(i, j)] / (deg[i] * deg[j]).sqrt());
    let (values, vectors) = jacobi_eigen(s.view());
    // Eigenvalues of the normalized bipartite adjacency come in +/- pairs;
    // the leading positive ones give the smallest normalized-cut values.
    let chosen: Vec<usize> = (0..size).filter(|&i| values[i] > 1e-5).take(k).collect();
    let mut emb = Array2::<f64>::zeros((n, chosen.len()));
    for i in 0..n {
        for (col, &e) in chosen.iter().enumerate() {
            emb[(i, col)] = vectors[(i, e)];
        }
        let norm = emb.row(i).dot(&emb.row(i)).sqrt();
        if norm > 0.0 {
            emb.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }
    reference_kmeans(emb.view(), k, 20, seed)
}

/// NMI with arithmetic-mean normalization, straight from the definition.
pub fn reference_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut joint = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
    }
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum() };
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let pij = joint[i][j] / n;
            if pij > 0.0 {
                mi += pij * (pij / (pa[i] * pb[j])).ln();
            }
        }
    }
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    mi / (0.5 * (ha + hb))
}

/// Best agreement over every injective relabeling of the predictions.
pub fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let slots = kp.max(kt);
    let mut perm: Vec<usize> = (0..slots).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn permute(v: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == v.len() {
        f(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permute(v, start + 1, f);
        v.swap(start, i);
    }
}

/// Exact `k` nearest rows of `reps` for each row of `x`, as sorted index sets.
pub fn brute_knn(x: ArrayView2<'_, f64>, reps: ArrayView2<'_, f64>, k: usize) -> Vec<Vec<usize>> {
    x.rows()
        .into_iter()
        .map(|p| {
            let mut d: Vec<(f64, usize)> = reps
                .rows()
                .into_iter()
                .enumerate()
                .map(|(j, r)| (sq(p.as_slice().unwrap(), r.as_slice().unwrap()), j))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut idx: Vec<usize> = d[..k].iter().map(|x| x.1).collect();
            idx.sort();
            idx
        })
        .collect()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Two-view contrastive loss written term by term: for anchor `i` of view
/// `a`, `-ln( e^{s(a_i,b_i)/t} / (sum_{j != i} e^{s(a_i,a_j)/t} + sum_j e^{s(a_i,b_j)/t}) )`,
/// symmetric for view `b`, averaged over all `2n` anchors. With
/// `exclude_self = false` the `j == i` same-view term is kept.
pub fn literal_contrastive(a: &[Vec<f64>], b: &[Vec<f64>], t: f64, exclude_self: bool) -> f64 {
    let n = a.len();
    let anchor = |x: &[Vec<f64>], y: &[Vec<f64>], i: usize| -> f64 {
        let mut den = 0.0;
        for j in 0..n {
            if !(exclude_self && j == i) {
                den += (cos(&x[i], &x[j]) / t).exp();
            }
            den += (cos(&x[i], &y[j]) / t).exp();
        }
        -((cos(&x[i], &y[i]) / t).exp() / den).ln()
    };
    let total: f64 = (0..n).map(|i| anchor(a, b, i) + anchor(b, a, i)).sum();
    total / (2 * n) as f64
}

pub fn rows_of(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn cols_of(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.columns().into_iter().map(|r| r.to_vec()).collect()
}

/// `-sum p ln p` of the column-mass distribution of each view, summed.
pub fn literal_entropy(da: ArrayView2<'_, f64>, db: ArrayView2<'_, f64>) -> f64 {
    [da, db]
        .iter()
        .map(|d| {
            let total: f64 = d.sum();
            d.columns()
                .into_iter()
                .map(|c| c.sum() / total)
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum::<f64>()
        })
        .sum()
}

/// Random row-stochastic matrix.
pub fn stochastic(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, cols), |_| r.random::<f64>() + 0.05);
    for mut row in m.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    m
}
