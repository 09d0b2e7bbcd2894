#![allow(clippy::approx_constant)]

mod common;

use approx::assert_abs_diff_eq;
use cluens::contrastive::*;
use cluens::metrics::nmi;
use cluens::FeatureMatrix;
use common::*;
use ndarray::{array, s, Array2, Axis};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn cfg(exclude: bool) -> LossConfig {
    LossConfig {
        self_pair_excluded: exclude,
        ..LossConfig::default()
    }
}

#[test]
fn cosine_examples() {
    let u = array![3.0, -1.0, 2.0];
    assert_abs_diff_eq!(cosine_similarity(u.view(), u.view()).unwrap(), 1.0, epsilon = TOL);
    assert_eq!(cosine_similarity(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap(), 0.0);
    let v = cosine_similarity(array![1.0, 0.0].view(), array![1.0, 1.0].view()).unwrap();
    assert_abs_diff_eq!(v, 0.707_106_78, epsilon = 1e-8);
    assert_abs_diff_eq!(v, std::f64::consts::FRAC_1_SQRT_2, epsilon = TOL);
    assert!(cosine_similarity(array![0.0, 0.0].view(), u.slice(s![..2])).is_err());
}

#[test]
fn instance_golden_orthogonal_pair() {
    // n = 2, Pa = Pb = I, tau = 0.5, self pair excluded. For each anchor the
    // denominator holds one orthogonal same-view term (e^0), the positive
    // (e^2) and one orthogonal cross-view term (e^0): loss = ln(2 + e^2) - 2.
    let p = array![[1.0, 0.0], [0.0, 1.0]];
    let oracle = literal_contrastive(&rows_of(p.view()), &rows_of(p.view()), 0.5, true);
    let golden = 0.239_544_766_221_884_1;
    assert_abs_diff_eq!(oracle, golden, epsilon = TOL);
    assert_abs_diff_eq!((2.0 + 2f64.exp()).ln() - 2.0, golden, epsilon = TOL);
    let got = instance_loss(p.view(), p.view(), 0.5, true).unwrap();
    assert_abs_diff_eq!(got, golden, epsilon = TOL);
}

#[test]
fn instance_golden_with_self_pair() {
    let p = array![[1.0, 0.0], [0.0, 1.0]];
    let oracle = literal_contrastive(&rows_of(p.view()), &rows_of(p.view()), 0.5, false);
    let got = instance_loss(p.view(), p.view(), 0.5, false).unwrap();
    assert_abs_diff_eq!(got, oracle, epsilon = TOL);
    assert_abs_diff_eq!(got, (2.0 + 2.0 * 2f64.exp()).ln() - 2.0, epsilon = TOL);
}

#[test]
fn instance_loss_scale_invariant() {
    let mut r = rng(1);
    let pa = gaussian(6, 4, &mut r);
    let pb = gaussian(6, 4, &mut r);
    let base = instance_loss(pa.view(), pb.view(), 0.5, true).unwrap();
    let scaled = instance_loss((&pa * 3.0).view(), (&pb * 3.0).view(), 0.5, true).unwrap();
    assert_abs_diff_eq!(base, scaled, epsilon = TOL);
}

#[test]
fn broken_positive_pairs_cost_more() {
    let pb = array![[1.0, 0.2], [0.1, 1.0]];
    let aligned = pb.clone();
    let swapped = array![[0.1, 1.0], [1.0, 0.2]];
    let l_aligned = instance_loss(aligned.view(), pb.view(), 0.5, true).unwrap();
    let l_swapped = instance_loss(swapped.view(), pb.view(), 0.5, true).unwrap();
    let o_aligned = literal_contrastive(&rows_of(aligned.view()), &rows_of(pb.view()), 0.5, true);
    let o_swapped = literal_contrastive(&rows_of(swapped.view()), &rows_of(pb.view()), 0.5, true);
    assert_abs_diff_eq!(l_aligned, o_aligned, epsilon = TOL);
    assert_abs_diff_eq!(l_swapped, o_swapped, epsilon = TOL);
    assert!(l_swapped > l_aligned);
}

#[test]
fn cluster_golden_balanced_one_hot() {
    // 4 samples hard-assigned to 2 balanced clusters in both views: the
    // cluster columns are orthogonal, so with tau_C = 1 each anchor sees
    // e^1 (positive) + e^0 + e^0: loss = ln(2 + e) - 1.
    let d = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
    let oracle = literal_contrastive(&cols_of(d.view()), &cols_of(d.view()), 1.0, true);
    let golden = 0.551_444_713_932_051_4;
    assert_abs_diff_eq!(oracle, golden, epsilon = TOL);
    assert_abs_diff_eq!((2.0 + 1f64.exp()).ln() - 1.0, golden, epsilon = TOL);
    assert_abs_diff_eq!(cluster_loss(d.view(), d.view(), 1.0, true).unwrap(), golden, epsilon = TOL);
}

#[test]
fn cluster_loss_scale_invariant_and_swap_costs_more() {
    let mut r = rng(2);
    let da = stochastic(8, 2, &mut r);
    let db = stochastic(8, 2, &mut r);
    let base = cluster_loss(da.view(), db.view(), 1.0, true).unwrap();
    let scaled = cluster_loss((&da * 2.5).view(), (&db * 2.5).view(), 1.0, true).unwrap();
    assert_abs_diff_eq!(base, scaled, epsilon = TOL);

    let d = array![[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.3, 0.7]];
    let swapped = d.select(Axis(1), &[1, 0]);
    let aligned = cluster_loss(d.view(), d.view(), 1.0, true).unwrap();
    let crossed = cluster_loss(swapped.view(), d.view(), 1.0, true).unwrap();
    let oracle = literal_contrastive(&cols_of(swapped.view()), &cols_of(d.view()), 1.0, true);
    assert_abs_diff_eq!(crossed, oracle, epsilon = TOL);
    assert!(crossed > aligned);
}

#[test]
fn cluster_loss_rejects_single_cluster() {
    let d = array![[1.0], [1.0]];
    assert!(cluster_loss(d.view(), d.view(), 1.0, true).is_err());
}

#[test]
fn entropy_examples() {
    let k = 4;
    let u = Array2::from_elem((5, k), 1.0 / k as f64);
    assert_eq!(entropy_regularizer(u.view(), u.view()).unwrap(), 2.0 * (k as f64).ln());

    let mut z = Array2::<f64>::zeros((3, 3));
    z.column_mut(0).fill(1.0);
    assert_eq!(entropy_regularizer(z.view(), z.view()).unwrap(), 0.0);

    let da = array![[0.25, 0.75], [0.25, 0.75]];
    let db = array![[0.5, 0.5], [0.5, 0.5]];
    let h = entropy_regularizer(da.view(), db.view()).unwrap();
    assert_abs_diff_eq!(h, 0.562_335 + 0.693_147, epsilon = 1e-6);
    assert_abs_diff_eq!(h, -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln()) + 2f64.ln(), epsilon = 1e-9);
}

fn random_batch(n: usize, dp: usize, k: usize, seed: u64) -> ProjectedBatch {
    let mut r = rng(seed);
    ProjectedBatch::new(gaussian(n, dp, &mut r), gaussian(n, dp, &mut r), stochastic(n, k, &mut r), stochastic(n, k, &mut r))
        .unwrap()
}

#[test]
fn total_loss_matches_literal_oracle() {
    for seed in 0..5 {
        let b = random_batch(7, 5, 3, seed);
        for exclude in [true, false] {
            let c = cfg(exclude);
            let got = total_loss(&b, &c).unwrap();
            let l_con = literal_contrastive(&rows_of(b.pa.view()), &rows_of(b.pb.view()), c.tau_i, exclude);
            let l_cc = literal_contrastive(&cols_of(b.da.view()), &cols_of(b.db.view()), c.tau_c, exclude);
            let h = literal_entropy(b.da.view(), b.db.view());
            assert_abs_diff_eq!(got.instance, l_con, epsilon = 1e-9);
            assert_abs_diff_eq!(got.cluster_contrastive, l_cc, epsilon = 1e-9);
            assert_abs_diff_eq!(got.entropy, h, epsilon = 1e-9);
            assert_abs_diff_eq!(got.total, l_con + l_cc - h, epsilon = 1e-9);
        }
    }
}

#[test]
fn uniform_assignments_reach_the_bound_exactly() {
    for k in 2..=16usize {
        for n in [1, 3, 7, 64] {
            let u = Array2::from_elem((n, k), 1.0 / k as f64);
            assert_eq!(entropy_regularizer(u.view(), u.view()).unwrap(), 2.0 * (k as f64).ln());
        }
    }
}

#[test]
fn breakdown_example() {
    let b = LossBreakdown::from_parts(1.0, 0.5, 0.3);
    assert_abs_diff_eq!(b.total, 1.2, epsilon = 1e-15);
    assert_abs_diff_eq!(b.cluster, 0.2, epsilon = 1e-15);
}

#[test]
fn projected_batch_requires_row_stochastic() {
    let mut r = rng(3);
    let p = gaussian(4, 3, &mut r);
    let bad = Array2::from_elem((4, 2), 0.4);
    assert!(ProjectedBatch::new(p.clone(), p.clone(), bad.clone(), bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_identities_hold(seed in any::<u64>(), n in 2usize..9, k in 2usize..6, exclude in any::<bool>()) {
        let b = random_batch(n, 4, k, seed);
        let l = total_loss(&b, &cfg(exclude)).unwrap();
        prop_assert!((l.total - l.instance - l.cluster).abs() <= 1e-12);
        prop_assert!((l.cluster - (l.cluster_contrastive - l.entropy)).abs() <= 1e-12);
        prop_assert!(l.entropy >= 0.0 && l.entropy <= 2.0 * (k as f64).ln() + 1e-12);
    }

    #[test]
    fn instance_loss_permutation_invariant(seed in any::<u64>(), n in 2usize..8) {
        let mut r = rng(seed);
        let pa = gaussian(n, 3, &mut r);
        let pb = gaussian(n, 3, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % n);
        let base = instance_loss(pa.view(), pb.view(), 0.5, true).unwrap();
        let moved = instance_loss(pa.select(Axis(0), &perm).view(), pb.select(Axis(0), &perm).view(), 0.5, true).unwrap();
        prop_assert!((base - moved).abs() <= 1e-12);
    }

    #[test]
    fn cluster_loss_column_permutation_invariant(seed in any::<u64>(), k in 2usize..6) {
        let mut r = rng(seed);
        let da = stochastic(6, k, &mut r);
        let db = stochastic(6, k, &mut r);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left(1);
        let base = cluster_loss(da.view(), db.view(), 1.0, true).unwrap();
        let moved = cluster_loss(da.select(Axis(1), &perm).view(), db.select(Axis(1), &perm).view(), 1.0, true).unwrap();
        prop_assert!((base - moved).abs() <= 1e-12);
        let h = entropy_regularizer(da.view(), db.view()).unwrap();
        let hm = entropy_regularizer(da.select(Axis(1), &perm).view(), db.select(Axis(1), &perm).view()).unwrap();
        prop_assert!((h - hm).abs() <= 1e-12);
    }

    #[test]
    fn entropy_maximal_only_when_uniform(seed in any::<u64>(), k in 2usize..6) {
        let mut r = rng(seed);
        let da = stochastic(5, k, &mut r);
        let u = Array2::from_elem((5, k), 1.0 / k as f64);
        let h = entropy_regularizer(da.view(), u.view()).unwrap();
        prop_assert!(h < 2.0 * (k as f64).ln());
    }
}

fn small_shape() -> EncoderShape {
    EncoderShape {
        input_dim: 6,
        backbone: vec![8, 7],
        instance_hidden: 6,
        instance_dim: 5,
        cluster_hidden: 6,
        clusters: 3,
    }
}

/// Largest relative error between the analytic gradient and central
/// differences (step 1e-5), with the denominator floored at 1e-6.
fn max_fd_error(encoder: &ToyEncoder, a: &Array2<f64>, b: &Array2<f64>, c: &LossConfig) -> f64 {
    let (_, grads) = loss_and_gradient(encoder, a.view(), b.view(), c, LossTerms::ALL).unwrap();
    let analytic = grads.params();
    let base = encoder.params();
    let mut probe = encoder.clone();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p);
        let up = loss_value(&probe, a.view(), b.view(), c, LossTerms::ALL).unwrap().total;
        p[i] = base[i] - h;
        probe.set_params(&p);
        let down = loss_value(&probe, a.view(), b.view(), c, LossTerms::ALL).unwrap().total;
        let numeric = (up - down) / (2.0 * h);
        let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

fn views(seed: u64, n: usize) -> (Array2<f64>, Array2<f64>) {
    let mut r = rng(seed);
    let raw = gaussian(n, 6, &mut r);
    let std = feature_std(raw.view());
    let mut ar = cluens::seed::rng(seed);
    Augmenter::default().views(raw.view(), std.view(), &mut ar)
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..20u64 {
        let encoder = ToyEncoder::new(&small_shape(), seed).unwrap();
        let (a, b) = views(1000 + seed, 8);
        let exclude = seed % 2 == 0;
        let err = max_fd_error(&encoder, &a, &b, &cfg(exclude));
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn loss_gradient_equals_two_view_gradient() {
    let encoder = ToyEncoder::new(&small_shape(), 4).unwrap();
    let mut r = rng(9);
    let raw = gaussian(10, 6, &mut r);
    let (l1, g1) = loss_gradient(&encoder, raw.view(), &Augmenter::default(), &LossConfig::default(), 77).unwrap();
    let (l2, g2) = loss_gradient(&encoder, raw.view(), &Augmenter::default(), &LossConfig::default(), 77).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1.params(), g2.params());
    assert!(loss_gradient(&encoder, gaussian(10, 5, &mut r).view(), &Augmenter::NONE, &LossConfig::default(), 1).is_err());
}

#[test]
fn unused_input_has_zero_gradient() {
    let encoder = ToyEncoder::new(&small_shape(), 11).unwrap();
    let mut r = rng(12);
    let mut raw = gaussian(8, 6, &mut r);
    raw.column_mut(2).fill(0.0);
    let (_, grads) = loss_gradient(&encoder, raw.view(), &Augmenter::NONE, &LossConfig::default(), 5).unwrap();
    let first = &grads.layers()[0];
    assert!(first.weight.column(2).iter().all(|&g| g == 0.0));
    assert!(first.weight.column(0).iter().any(|&g| g != 0.0));
}

#[test]
fn duplicated_batch_keeps_instance_gradient() {
    // With the self pair kept, duplicating every sample doubles each
    // denominator exactly, shifting the loss by ln 2 and leaving gradients.
    let encoder = ToyEncoder::new(&small_shape(), 21).unwrap();
    let (a, b) = views(22, 6);
    let a2 = ndarray::concatenate(Axis(0), &[a.view(), a.view()]).unwrap();
    let b2 = ndarray::concatenate(Axis(0), &[b.view(), b.view()]).unwrap();
    let c = cfg(false);
    let (l1, g1) = loss_and_gradient(&encoder, a.view(), b.view(), &c, LossTerms::INSTANCE_ONLY).unwrap();
    let (l2, g2) = loss_and_gradient(&encoder, a2.view(), b2.view(), &c, LossTerms::INSTANCE_ONLY).unwrap();
    assert_abs_diff_eq!(l2.instance - l1.instance, 2f64.ln(), epsilon = 1e-12);
    for (x, y) in g1.params().iter().zip(g2.params()) {
        assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
    }
}

#[test]
fn training_is_deterministic() {
    let (x, _) = blobs(64, 4, 16, 3.0, 5);
    let data = FeatureMatrix::new(x).unwrap();
    let mut t = TrainConfig::new(4, 3, 16, 8);
    t.shape = Some(EncoderShape {
        backbone: vec![16, 16],
        ..EncoderShape::new(16, 4)
    });
    let a = train_toy(&data, &t).unwrap();
    let b = train_toy(&data, &t).unwrap();
    assert_eq!(a.loss_trace.len(), 3);
    assert_eq!(
        a.loss_trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.loss_trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a.encoder.params(), b.encoder.params());
}

#[test]
fn training_rejects_bad_batches() {
    let data = FeatureMatrix::new(Array2::zeros((4, 2))).unwrap();
    assert!(train_toy(&data, &TrainConfig::new(2, 1, 1, 0)).is_err());
    assert!(train_toy(&data, &TrainConfig::new(2, 1, 8, 0)).is_err());
}

#[test]
fn training_separates_blobs() {
    let (x, truth) = blobs(400, 4, 16, 2.5, 31);
    let data = FeatureMatrix::new(x).unwrap();
    let t = TrainConfig::new(4, 200, 128, 3);
    let out = train_toy(&data, &t).unwrap();
    let pred = out.encoder.predict_clusters(data.view()).unwrap();
    let score = nmi(&pred, &truth).unwrap();
    assert!(score >= 0.9, "nmi {score}");
    assert!(out.loss_trace.last().unwrap() < out.loss_trace.first().unwrap());
}

#[test]
fn extracted_layers_follow_selection() {
    let encoder = ToyEncoder::new(&EncoderShape::new(5, 3), 1).unwrap();
    let mut r = rng(2);
    let x = gaussian(7, 5, &mut r);
    let layers = encoder.extract_layers(x.view(), 3, 2, 1).unwrap();
    let tags: Vec<&str> = layers.iter().map(|(t, _)| t.as_str()).collect();
    assert_eq!(tags, ["backbone:0", "backbone:1", "backbone:2", "instance:0", "instance:1", "cluster:0"]);
    let dims: Vec<usize> = layers.iter().map(|(_, m)| m.ncols()).collect();
    assert_eq!(dims, [64, 64, 32, 64, 128, 64]);
    assert!(encoder.extract_layers(x.view(), 4, 0, 0).is_err());
}
