//! External clustering metrics: NMI, ARI and best-matching accuracy.
//!
//! NMI is normalized by the arithmetic mean of the two label entropies.

use crate::error::{Error, Result};
use crate::model::densify;

/// Co-occurrence counts between two labelings of the same samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<u64>,
    rows: usize,
    cols: usize,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::invalid("labelings must be nonempty"));
        }
        let (a, rows) = densify(a);
        let (b, cols) = densify(b);
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&i, &j) in a.iter().zip(&b) {
            counts[i * cols + j] += 1;
            row_sums[i] += 1;
            col_sums[j] += 1;
        }
        Ok(Self {
            counts,
            rows,
            cols,
            row_sums,
            col_sums,
            total: a.len() as u64,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

fn entropy(marginal: &[u64], total: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    let n = t.total as f64;
    let ha = entropy(&t.row_sums, n);
    let hb = entropy(&t.col_sums, n);
    if t.rows == 1 && t.cols == 1 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for i in 0..t.rows {
        for j in 0..t.cols {
            let c = t.get(i, j);
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (c * n / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
        }
    }
    let denom = 0.5 * (ha + hb);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn comb2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.total < 2 {
        return Err(Error::invalid("ARI needs at least two samples"));
    }
    let index: f64 = t.counts.iter().map(|&c| comb2(c)).sum();
    let sum_a: f64 = t.row_sums.iter().map(|&c| comb2(c)).sum();
    let sum_b: f64 = t.col_sums.iter().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(t.total);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both partitions trivial (all-in-one or all singletons) and equal.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of samples on which `predicted` agrees with `truth` under the
/// best one-to-one mapping of predicted clusters onto true clusters.
pub fn acc(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(predicted, truth)?;
    let size = t.rows.max(t.cols);
    let mut profit = vec![0i64; size * size];
    for i in 0..t.rows {
        for j in 0..t.cols {
            profit[i * size + j] = t.get(i, j) as i64;
        }
    }
    let assignment = max_weight_assignment(&profit, size);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| profit[i * size + j])
        .sum();
    Ok(matched as f64 / t.total as f64)
}

/// Greedy largest-overlap-first matching; a lower bound for [`acc`].
pub fn greedy_acc(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(predicted, truth)?;
    let mut cells: Vec<(u64, usize, usize)> = (0..t.rows)
        .flat_map(|i| (0..t.cols).map(move |j| (i, j)))
        .map(|(i, j)| (t.get(i, j), i, j))
        .collect();
    cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut row_used = vec![false; t.rows];
    let mut col_used = vec![false; t.cols];
    let mut matched = 0;
    for (c, i, j) in cells {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            matched += c;
        }
    }
    Ok(matched as f64 / t.total as f64)
}

/// Square assignment maximizing total profit, by the O(n^3)
/// shortest-augmenting-path Hungarian method. Returns `col[row]`.
pub fn max_weight_assignment(profit: &[i64], n: usize) -> Vec<usize> {
    assert_eq!(profit.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let max = profit.iter().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| max - profit[i * n + j];

    // 1-based potentials; p[j] = row matched to column j.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}
