//! Instance- and cluster-level contrastive losses and the cluster-size
//! entropy regularizer, each with its analytic input gradient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Instance-level temperature.
    pub tau_i: f64,
    /// Cluster-level temperature.
    pub tau_c: f64,
    /// Drop the `j == i` same-view term from each denominator.
    pub self_pair_excluded: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau_i: 0.5,
            tau_c: 1.0,
            self_pair_excluded: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_i > 0.0 && self.tau_c > 0.0) {
            return Err(Error::invalid(format!(
                "temperatures must be positive, got tau_i={} tau_c={}",
                self.tau_i, self.tau_c
            )));
        }
        Ok(())
    }
}

pub fn cosine_similarity(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroNorm(0));
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm(1));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Value and row gradients of a two-view contrastive loss.
#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
}

/// Two-view contrastive loss over the rows of `a` and `b`: row `i` of `a`
/// and row `i` of `b` are the positive pair, every other row of either view
/// is a negative. Averaged over all `2m` anchors.
pub fn contrastive_with_grad(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    tau: f64,
    self_pair_excluded: bool,
) -> Result<ContrastiveOutput> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "views differ in shape: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let m = a.nrows();
    if m < 2 {
        return Err(Error::invalid(format!(
            "contrastive loss needs at least 2 items per view, got {m}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let total = 2 * m;
    let z = ndarray::concatenate(Axis(0), &[a, b]).expect("same width");
    let norms: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroNorm(i % m));
    }
    let mut unit = z.clone();
    for (mut row, &nrm) in unit.rows_mut().into_iter().zip(&norms) {
        row.mapv_inplace(|x| x / nrm);
    }
    let sim = unit.dot(&unit.t()) / tau;

    let positive = |r: usize| if r < m { r + m } else { r - m };
    let scale = 1.0 / total as f64;
    let mut loss = 0.0;
    let mut g = Array2::<f64>::zeros((total, total));
    for r in 0..total {
        let row = sim.row(r);
        let in_den = |j: usize| !(self_pair_excluded && j == r);
        let max = (0..total)
            .filter(|&j| in_den(j))
            .map(|j| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..total)
            .filter(|&j| in_den(j))
            .map(|j| (row[j] - max).exp())
            .sum();
        let lse = max + sum.ln();
        loss += lse - row[positive(r)];
        for j in (0..total).filter(|&j| in_den(j)) {
            g[(r, j)] = (row[j] - lse).exp() * scale;
        }
        g[(r, positive(r))] -= scale;
    }
    loss *= scale;

    // d loss / d unit = (G + G^T) U / tau, then back through normalization.
    let sym = &g + &g.t();
    let grad_unit = sym.dot(&unit) / tau;
    let mut grad = Array2::<f64>::zeros(z.dim());
    for r in 0..total {
        let u = unit.row(r);
        let gu = grad_unit.row(r);
        let proj = gu.dot(&u);
        let mut out = grad.row_mut(r);
        for ((o, &gi), &ui) in out.iter_mut().zip(gu.iter()).zip(u.iter()) {
            *o = (gi - proj * ui) / norms[r];
        }
    }
    let grad_a = grad.slice(ndarray::s![..m, ..]).to_owned();
    let grad_b = grad.slice(ndarray::s![m.., ..]).to_owned();
    Ok(ContrastiveOutput {
        loss,
        grad_a,
        grad_b,
    })
}

/// Instance-level loss over the rows of the two projector outputs.
pub fn instance_loss(
    pa: ArrayView2<'_, f64>,
    pb: ArrayView2<'_, f64>,
    tau_i: f64,
    self_pair_excluded: bool,
) -> Result<f64> {
    Ok(contrastive_with_grad(pa, pb, tau_i, self_pair_excluded)?.loss)
}

/// Cluster-level contrastive part: the same loss over the columns of the
/// soft-assignment matrices.
pub fn cluster_loss(
    da: ArrayView2<'_, f64>,
    db: ArrayView2<'_, f64>,
    tau_c: f64,
    self_pair_excluded: bool,
) -> Result<f64> {
    Ok(contrastive_with_grad(da.t(), db.t(), tau_c, self_pair_excluded)?.loss)
}

fn column_entropy(d: ArrayView2<'_, f64>) -> Result<(f64, Array1<f64>, f64)> {
    if d.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("assignments must be finite and nonnegative"));
    }
    let mass = d.sum_axis(Axis(0));
    let total = mass.sum();
    if total <= 0.0 {
        return Err(Error::invalid("assignment matrix has zero mass"));
    }
    let p = &mass / total;
    let h = if mass.iter().all(|&m| m == mass[0]) {
        (mass.len() as f64).ln()
    } else {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
    };
    Ok((h, p, total))
}

/// Cluster-size entropy (natural log) summed over both views.
pub fn entropy_regularizer(da: ArrayView2<'_, f64>, db: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(column_entropy(da)?.0 + column_entropy(db)?.0)
}

/// Entropy of one view and its gradient with respect to every entry.
fn entropy_with_grad(d: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    let (h, p, total) = column_entropy(d)?;
    let col_grad: Array1<f64> = p.mapv(|x| (-(x.max(f64::MIN_POSITIVE)).ln() - h) / total);
    let grad = Array2::from_shape_fn(d.dim(), |(_, j)| col_grad[j]);
    Ok((h, grad))
}

/// Projector outputs of one mini-batch under two augmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBatch {
    pub pa: Array2<f64>,
    pub pb: Array2<f64>,
    pub da: Array2<f64>,
    pub db: Array2<f64>,
}

impl ProjectedBatch {
    pub fn new(pa: Array2<f64>, pb: Array2<f64>, da: Array2<f64>, db: Array2<f64>) -> Result<Self> {
        if pa.dim() != pb.dim() || da.dim() != db.dim() || pa.nrows() != da.nrows() {
            return Err(Error::Shape("inconsistent projected batch shapes".into()));
        }
        for d in [&da, &db] {
            for (i, row) in d.rows().into_iter().enumerate() {
                if row.iter().any(|&x| x < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "soft assignment row {i} is not a probability vector"
                    )));
                }
            }
        }
        Ok(Self { pa, pb, da, db })
    }
}

/// Loss components. `cluster = cluster_contrastive - entropy` and
/// `total = instance + cluster`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub instance: f64,
    pub cluster: f64,
    pub cluster_contrastive: f64,
    pub entropy: f64,
}

impl LossBreakdown {
    pub fn from_parts(instance: f64, cluster_contrastive: f64, entropy: f64) -> Self {
        let cluster = cluster_contrastive - entropy;
        Self {
            total: instance + cluster,
            instance,
            cluster,
            cluster_contrastive,
            entropy,
        }
    }
}

pub fn total_loss(batch: &ProjectedBatch, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(total_loss_with_grad(batch, cfg, LossTerms::ALL)?.0)
}

/// Which terms enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub instance: bool,
    pub cluster: bool,
    pub entropy: bool,
}

impl LossTerms {
    pub const ALL: Self = Self {
        instance: true,
        cluster: true,
        entropy: true,
    };
    pub const INSTANCE_ONLY: Self = Self {
        instance: true,
        cluster: false,
        entropy: false,
    };
}

/// Gradients of the selected objective with respect to the projector outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads {
    pub pa: Array2<f64>,
    pub pb: Array2<f64>,
    pub da: Array2<f64>,
    pub db: Array2<f64>,
}

pub fn total_loss_with_grad(
    batch: &ProjectedBatch,
    cfg: &LossConfig,
    terms: LossTerms,
) -> Result<(LossBreakdown, OutputGrads)> {
    cfg.validate()?;
    let inst = contrastive_with_grad(batch.pa.view(), batch.pb.view(), cfg.tau_i, cfg.self_pair_excluded)?;
    let clu = contrastive_with_grad(batch.da.t(), batch.db.t(), cfg.tau_c, cfg.self_pair_excluded)?;
    let (ha, gha) = entropy_with_grad(batch.da.view())?;
    let (hb, ghb) = entropy_with_grad(batch.db.view())?;

    let mut grads = OutputGrads {
        pa: Array2::zeros(batch.pa.dim()),
        pb: Array2::zeros(batch.pb.dim()),
        da: Array2::zeros(batch.da.dim()),
        db: Array2::zeros(batch.db.dim()),
    };
    if terms.instance {
        grads.pa += &inst.grad_a;
        grads.pb += &inst.grad_b;
    }
    if terms.cluster {
        grads.da += &clu.grad_a.t();
        grads.db += &clu.grad_b.t();
    }
    if terms.entropy {
        grads.da -= &gha;
        grads.db -= &ghb;
    }
    let breakdown = LossBreakdown::from_parts(
        if terms.instance { inst.loss } else { 0.0 },
        if terms.cluster { clu.loss } else { 0.0 },
        if terms.entropy { ha + hb } else { 0.0 },
    );
    Ok((breakdown, grads))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn cosine_cases() {
        let u = array![1.0, 0.0];
        assert_eq!(cosine_similarity(u.view(), u.view()).unwrap(), 1.0);
        assert_eq!(cosine_similarity(u.view(), array![0.0, 1.0].view()).unwrap(), 0.0);
        let s = cosine_similarity(u.view(), array![1.0, 1.0].view()).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(u.view(), array![0.0, 0.0].view()),
            Err(Error::ZeroNorm(1))
        ));
    }

    #[test]
    fn uniform_entropy_is_maximal() {
        let k = 4;
        let d = Array2::from_elem((6, k), 1.0 / k as f64);
        let h = entropy_regularizer(d.view(), d.view()).unwrap();
        assert!((h - 2.0 * (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_entropy_is_zero() {
        let mut d = Array2::zeros((5, 3));
        d.column_mut(0).fill(1.0);
        assert_eq!(entropy_regularizer(d.view(), d.view()).unwrap(), 0.0);
    }

    #[test]
    fn mixed_entropy_closed_form() {
        // Column masses (0.25, 0.75) in view a, uniform in view b.
        let da = array![[0.5, 0.5], [0.0, 1.0]];
        let db = array![[0.5, 0.5], [0.5, 0.5]];
        let h = entropy_regularizer(da.view(), db.view()).unwrap();
        assert!((h - (0.562_335_144_618_551_4 + 0.693_147_180_559_945_3)).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_rejected() {
        let d = Array2::<f64>::zeros((3, 2));
        assert!(entropy_regularizer(d.view(), d.view()).is_err());
    }

    #[test]
    fn breakdown_is_additive() {
        let b = LossBreakdown::from_parts(1.0, 0.5, 0.3);
        assert!((b.total - 1.2).abs() < 1e-15);
        assert!((b.total - b.instance - b.cluster).abs() < 1e-12);
    }

    #[test]
    fn instance_loss_needs_two_rows() {
        let p = array![[1.0, 0.0]];
        assert!(instance_loss(p.view(), p.view(), 0.5, true).is_err());
    }

    #[test]
    fn cluster_loss_rejects_zero_column() {
        let d = array![[1.0, 0.0], [1.0, 0.0]];
        assert!(cluster_loss(d.view(), d.view(), 1.0, true).is_err());
    }
}
