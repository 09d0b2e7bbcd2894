//! Small dense linear-algebra helpers over `ndarray`, with the symmetric
//! eigensolver delegated to `nalgebra`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// Column `j` of `vectors` pairs with `values[j]`. Each eigenvector is
/// sign-normalized so its largest-magnitude entry is positive.
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

pub fn sym_eigen(a: ArrayView2<'_, f64>) -> SymEigen {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    // Symmetrize to absorb rounding asymmetry from accumulation.
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

    let values = Array1::from_iter(order.iter().map(|&j| eig.eigenvalues[j]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = sign_of_largest(col.iter().copied());
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    SymEigen { values, vectors }
}

/// `1.0` or `-1.0` such that the entry of largest magnitude (first on ties)
/// becomes positive.
pub(crate) fn sign_of_largest(values: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0f64;
    for v in values {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[inline]
pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(x), Some(y)) => sq_dist_slice(x, y),
        _ => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

#[inline]
pub fn sq_dist_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
