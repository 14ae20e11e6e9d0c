//! Library results checked against independent reference computations.

use std::collections::{BTreeMap, BTreeSet};

use approx::assert_relative_eq;
use driftscope_core::clustering::{cluster_trajectories, lowess_smooth, ClusterConfig};
use driftscope_core::corpus::{build_vocabulary, Post, WeekBucket};
use driftscope_core::embeddings::{sgns_loss, sgns_step, EmbeddingSeries, EmbeddingSnapshot};
use driftscope_core::explore::{nearest_neighbors, series_correlation, Metric, Pca};
use driftscope_core::forecast::LstmRegressor;
use driftscope_core::forecast::LstmParams;
use driftscope_core::synth::{
    generate_corpus, ground_truth, topic_word, FrequencyEntry, GroundTruth, SynthSpec,
};
use driftscope_core::clustering::Trend;
use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_series(rng: &mut ChaCha8Rng, weeks: usize, v: usize, d: usize) -> EmbeddingSeries {
    let snaps = (0..weeks)
        .map(|t| EmbeddingSnapshot {
            week_index: t,
            vocab_size: v,
            dim: d,
            input: (0..v * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            output: vec![0.0; v * d],
            epochs_run: 1,
            final_rho: 0.0,
            cap_hit: false,
            epoch_losses: Vec::new(),
        })
        .collect();
    EmbeddingSeries::new(snaps).unwrap()
}

#[test]
fn sgns_update_matches_finite_difference_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (v, d) = (8, 5);
    let input: Vec<f64> = (0..v * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let output: Vec<f64> = (0..v * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let (center, context, negatives) = (2, 5, [0usize, 3, 7]);
    let lr = 1e-3;
    let mut inp = input.clone();
    let mut out = output.clone();
    let mut delta = vec![0.0; d];
    let loss = sgns_step(&mut inp, &mut out, d, center, context, &negatives, lr, &mut delta);
    assert_relative_eq!(loss, sgns_loss(&input, &output, d, center, context, &negatives), epsilon = 1e-12);

    let eps = 1e-6;
    let numeric = |buf: &[f64], which_input: bool, idx: usize| {
        let mut plus = buf.to_vec();
        let mut minus = buf.to_vec();
        plus[idx] += eps;
        minus[idx] -= eps;
        let (lp, lm) = if which_input {
            (sgns_loss(&plus, &output, d, center, context, &negatives), sgns_loss(&minus, &output, d, center, context, &negatives))
        } else {
            (sgns_loss(&input, &plus, d, center, context, &negatives), sgns_loss(&input, &minus, d, center, context, &negatives))
        };
        (lp - lm) / (2.0 * eps)
    };
    for k in 0..d {
        let i = center * d + k;
        assert_relative_eq!((input[i] - inp[i]) / lr, numeric(&input, true, i), max_relative = 1e-6, epsilon = 1e-9);
        for &row in [context].iter().chain(&negatives) {
            let j = row * d + k;
            assert_relative_eq!((output[j] - out[j]) / lr, numeric(&output, false, j), max_relative = 1e-6, epsilon = 1e-9);
        }
    }
    // untouched rows stay put
    assert_eq!(&inp[..center * d], &input[..center * d]);
    assert_eq!(&out[d..2 * d], &output[d..2 * d]);
}

/// Brute-force LOWESS: pick the nearest points by (distance, index), weight
/// with tricube, solve the 2x2 normal equations.
fn reference_lowess(y: &[f64], frac: f64) -> Vec<f64> {
    let n = y.len();
    let span = ((frac * n as f64) - 1e-9).ceil() as usize;
    (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by_key(|&j| ((j as i64 - i as i64).unsigned_abs(), j));
            idx.truncate(span);
            let h = idx.iter().map(|&j| (j as f64 - i as f64).abs()).fold(0.0, f64::max);
            let weight = |j: usize| {
                let q = (j as f64 - i as f64).abs() / h;
                if q < 1.0 { (1.0 - q.powi(3)).powi(3) } else { 0.0 }
            };
            if idx.iter().filter(|&&j| weight(j) > 0.0).count() < 2 {
                return idx.iter().map(|&j| y[j]).sum::<f64>() / idx.len() as f64;
            }
            let mut a = Matrix2::zeros();
            let mut b = Vector2::zeros();
            for &j in &idx {
                let w = weight(j);
                let x = Vector2::new(1.0, j as f64);
                a += w * x * x.transpose();
                b += w * y[j] * x;
            }
            let beta = a.lu().solve(&b).unwrap();
            beta[0] + beta[1] * i as f64
        })
        .collect()
}

#[test]
fn lowess_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, frac) in [(12, 0.25), (24, 0.25), (23, 0.4), (40, 0.3), (10, 1.0)] {
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + rng.gen_range(-0.2..0.2)).collect();
        let got = lowess_smooth(&y, frac).unwrap();
        let want = reference_lowess(&y, frac);
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(*g, *w, epsilon = 1e-9);
        }
    }
}

#[test]
fn lowess_reproduces_lines() {
    let y: Vec<f64> = (0..20).map(|i| 0.5 - 0.1 * i as f64).collect();
    for (g, w) in lowess_smooth(&y, 0.25).unwrap().iter().zip(&y) {
        assert_relative_eq!(*g, *w, epsilon = 1e-12);
    }
}

#[test]
fn pca_matches_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 6;
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|_| {
            let a = rng.gen_range(-3.0..3.0);
            let b = rng.gen_range(-1.0..1.0);
            (0..d).map(|k| a * (k as f64 + 1.0) + b * (d - k) as f64 + rng.gen_range(-0.1..0.1)).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let pca = Pca::fit(&refs, d);

    let m = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let mean = m.row_mean();
    let centered = DMatrix::from_fn(rows.len(), d, |i, j| m[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / rows.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total: f64 = eig.eigenvalues.iter().sum();
    for c in 0..2 {
        let want = eig.eigenvectors.column(order[c]);
        let dotp: f64 = pca.basis[c].iter().zip(want.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(dotp.abs(), 1.0, epsilon = 1e-8);
        assert_relative_eq!(pca.evr[c], eig.eigenvalues[order[c]] / total, epsilon = 1e-10);
    }
    assert!(!pca.degenerate);
}

#[test]
fn pca_on_collinear_points_is_degenerate() {
    let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let pca = Pca::fit(&refs, 3);
    assert!(pca.degenerate);
    assert_eq!(pca.basis[1], vec![0.0; 3]);
    assert_relative_eq!(pca.evr[0], 1.0, epsilon = 1e-12);
}

#[test]
fn nearest_neighbors_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let series = random_series(&mut rng, 3, 30, 4);
    for metric in [Metric::Cosine, Metric::Euclidean] {
        for word in [0, 7, 29] {
            for t in 0..3 {
                let got = nearest_neighbors(&series, t, word, 5, metric).unwrap();
                let mut all: Vec<(f64, usize)> = (0..30)
                    .filter(|&j| j != word)
                    .map(|j| (metric.distance(series.vector(t, word), series.vector(t, j)), j))
                    .collect();
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let want: Vec<usize> = all.iter().take(5).map(|x| x.1).collect();
                assert_eq!(got.iter().map(|n| n.id).collect::<Vec<_>>(), want);
            }
        }
    }
}

#[test]
fn correlation_matrix_is_symmetric_when_series_coincide() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let keys: Vec<String> = (0..4).map(|i| format!("k{i}")).collect();
    let series: BTreeMap<String, Vec<f64>> = keys
        .iter()
        .map(|k| (k.clone(), (0..10).map(|_| rng.gen_range(0.0..1.0)).collect()))
        .collect();
    let m = series_correlation(&series, &series, &keys).unwrap();
    for i in 0..4 {
        assert_relative_eq!(m.entries[i][i].unwrap(), 1.0, epsilon = 1e-12);
        for j in 0..4 {
            assert_relative_eq!(m.entries[i][j].unwrap(), m.entries[j][i].unwrap(), epsilon = 1e-12);
        }
    }
}

#[test]
fn vocabulary_ids_ignore_post_order() {
    let words = ["alpha", "beta", "gamma", "delta", "eps"];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut posts: Vec<Post> = (0..40)
        .map(|i| Post {
            post_id: format!("p{i}"),
            timestamp: i,
            region: None,
            tokens: (0..5).map(|_| words[rng.gen_range(0..5)].to_string()).collect(),
        })
        .collect();
    let stop = BTreeSet::new();
    let a = build_vocabulary(&[WeekBucket { week_index: 0, posts: posts.clone() }], 1, &stop).unwrap();
    posts.reverse();
    let b = build_vocabulary(&[WeekBucket { week_index: 0, posts }], 1, &stop).unwrap();
    assert_eq!(a, b);
    for w in a.entries().windows(2) {
        assert!(w[0].post_freq > w[1].post_freq || (w[0].post_freq == w[1].post_freq && w[0].word < w[1].word));
    }
}

#[test]
fn ground_truth_round_trips_through_json() {
    let gt = ground_truth(&SynthSpec::default());
    let json = serde_json::to_string(&gt).unwrap();
    let back: GroundTruth = serde_json::from_str(&json).unwrap();
    assert_eq!(gt, back);
    assert_eq!(back.shifts.len(), 10);
}

fn weekly_counts(spec: &SynthSpec, words: &[String]) -> Vec<usize> {
    let (records, _) = generate_corpus(spec).unwrap();
    let mut counts = vec![0usize; spec.weeks()];
    for r in &records {
        let week: usize = r.id[1..4].parse().unwrap();
        counts[week] += r.text.split(' ').filter(|t| words.iter().any(|w| w == t)).count();
    }
    counts
}

#[test]
fn increasing_words_double_over_the_series() {
    let spec = SynthSpec {
        shifts: Vec::new(),
        frequency: (0..4)
            .map(|k| FrequencyEntry { word: topic_word(k, 10), trend: Trend::Increase, rate: 2.0, onset: None })
            .collect(),
        ..SynthSpec::default()
    };
    let words: Vec<String> = (0..4).map(|k| topic_word(k, 10)).collect();
    let counts = weekly_counts(&spec, &words);
    let ratio = *counts.last().unwrap() as f64 / counts[0] as f64;
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}, counts {counts:?}");
}

#[test]
fn flat_words_are_stationary() {
    let spec = SynthSpec { shifts: Vec::new(), frequency: Vec::new(), ..SynthSpec::default() };
    let words: Vec<String> = (0..4).map(|k| topic_word(k, 30)).collect();
    let counts = weekly_counts(&spec, &words);
    let expected = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 11 degrees of freedom
    assert!(chi2 < 31.26, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn clustering_ignores_series_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let series: Vec<(usize, Vec<f64>)> = (0..30)
        .map(|id| {
            let slope = [0.02, -0.02, 0.0][id % 3];
            (id, (0..16).map(|t| slope * t as f64 + 0.01 + rng.gen_range(-0.005..0.005)).collect())
        })
        .collect();
    let scaled: Vec<(usize, Vec<f64>)> = series.iter().map(|(id, s)| (*id, s.iter().map(|x| x * 7.5).collect())).collect();
    let cfg = ClusterConfig::default();
    let a = cluster_trajectories(&series, &cfg).unwrap();
    let b = cluster_trajectories(&scaled, &cfg).unwrap();
    assert_eq!(a.assignments, b.assignments);
}

#[test]
fn lstm_memorizes_a_single_sample() {
    let x = vec![vec![0.1, 0.4, -0.2, 0.3]];
    let y = vec![0.7];
    let params = LstmParams { hidden: 4, epochs: 500, batch: 1, ..LstmParams::default() };
    let model = LstmRegressor::fit(&x, &y, &params).unwrap();
    assert!((model.predict(&x[0]) - 0.7).powi(2) <= 1e-3);
}
