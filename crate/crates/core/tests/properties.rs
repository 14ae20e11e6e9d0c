use std::collections::BTreeSet;

use driftscope_core::clustering::{lowess_smooth, total_variation};
use driftscope_core::corpus::{build_vocabulary, Post, WeekBucket};
use driftscope_core::dynamics::{cosine_distance, diff_usage};
use driftscope_core::explore::Pca;
use driftscope_core::forecast::{build_dataset, pearson, ForecastTask, SeriesRow, TaskSource};
use driftscope_core::usage::{term_frequency, tfidf};
use proptest::prelude::*;

fn vec_pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max).prop_flat_map(|n| (prop::collection::vec(-10.0..10.0f64, n), prop::collection::vec(-10.0..10.0f64, n)))
}

proptest! {
    #[test]
    fn cosine_distance_is_bounded_symmetric_and_scale_free((u, v) in vec_pair(20), s in 0.1..50.0f64) {
        let d = cosine_distance(&u, &v);
        prop_assert!((0.0..=2.0).contains(&d.value));
        prop_assert_eq!(d.value, cosine_distance(&v, &u).value);
        let scaled: Vec<f64> = u.iter().map(|x| x * s).collect();
        prop_assert!((cosine_distance(&scaled, &v).value - d.value).abs() < 1e-9);
        prop_assert_eq!(cosine_distance(&u, &u).value, if d.zero_norm { 1.0 } else { 0.0 });
    }

    #[test]
    fn differences_telescope(y in prop::collection::vec(-5.0..5.0f64, 2..40)) {
        let d = diff_usage(&y).unwrap();
        prop_assert_eq!(d.len(), y.len() - 1);
        let sum: f64 = d.iter().sum();
        prop_assert!((sum - (y[y.len() - 1] - y[0])).abs() < 1e-9);
    }

    #[test]
    fn usage_statistics_are_well_formed(posts in prop::collection::vec(prop::collection::vec(0usize..8, 1..10), 1..25)) {
        let posts: Vec<Post> = posts
            .into_iter()
            .enumerate()
            .map(|(i, toks)| Post {
                post_id: format!("p{i}"),
                timestamp: i as i64,
                region: None,
                tokens: toks.into_iter().map(|t| format!("w{t}")).collect(),
            })
            .collect();
        let stop: BTreeSet<String> = ["w0".to_string()].into_iter().collect();
        let bucket = WeekBucket { week_index: 0, posts };
        let vocab = build_vocabulary(std::slice::from_ref(&bucket), 1, &stop).unwrap();
        let enc = vocab.encode_bucket(&bucket);
        let tf = term_frequency(&enc, &vocab);
        let chi = tfidf(&enc, &vocab);
        let sum: f64 = tf.values.iter().sum();
        if tf.empty {
            prop_assert_eq!(sum, 0.0);
        } else {
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
        prop_assert!(chi.values.iter().all(|&x| x >= 0.0 && x.is_finite()));
        if let Some(id) = vocab.id("w0") {
            prop_assert_eq!(tf.values[id], 0.0);
            prop_assert_eq!(chi.values[id], 0.0);
        }
    }

    #[test]
    fn lowess_is_affine_equivariant(y in prop::collection::vec(-1.0..1.0f64, 4..40), a in 0.1..10.0f64, b in -5.0..5.0f64) {
        let s = lowess_smooth(&y, 0.3).unwrap();
        prop_assert_eq!(s.len(), y.len());
        let moved: Vec<f64> = y.iter().map(|x| a * x + b).collect();
        for (m, o) in lowess_smooth(&moved, 0.3).unwrap().iter().zip(&s) {
            prop_assert!((m - (a * o + b)).abs() < 1e-7 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn pearson_is_bounded_and_affine_invariant((y, p) in vec_pair(30), a in 0.1..10.0f64, b in -3.0..3.0f64) {
        if let Ok(r) = pearson(&y, &p) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            let moved: Vec<f64> = p.iter().map(|x| a * x + b).collect();
            if let Ok(r2) = pearson(&y, &moved) {
                prop_assert!((r - r2).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pca_basis_is_orthonormal(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 4), 3..15)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let pca = Pca::fit(&refs, 4);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        if !pca.degenerate {
            prop_assert!((dot(&pca.basis[0], &pca.basis[0]) - 1.0).abs() < 1e-8);
            prop_assert!((dot(&pca.basis[1], &pca.basis[1]) - 1.0).abs() < 1e-8);
            prop_assert!(dot(&pca.basis[0], &pca.basis[1]).abs() < 1e-8);
            prop_assert!(pca.evr[0] >= pca.evr[1]);
        }
        prop_assert!(pca.evr[0] + pca.evr[1] <= 1.0 + 1e-9);
    }

    #[test]
    fn folds_partition_the_words(n in 4usize..120, k in 2usize..6, seed in any::<u64>()) {
        let rows: Vec<SeriesRow> = (0..n)
            .map(|id| SeriesRow { id, d_e: vec![0.1; 8], d_chi: vec![0.0; 8], tau_f: vec![1.0; 9] })
            .collect();
        let task = ForecastTask { source: TaskSource::Shift, horizon: 1 };
        match build_dataset(&rows, task, k, seed) {
            Ok(ds) => {
                let sizes = ds.fold_sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                prop_assert!(ds.features.iter().all(|f| f.len() == 8 - 1));
            }
            Err(_) => prop_assert!(n < k.max(4)),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn smoothing_does_not_add_variation(y in prop::collection::vec(-1.0..1.0f64, 3..40)) {
        let s = lowess_smooth(&y, 0.25).unwrap();
        prop_assert!(total_variation(&s) <= total_variation(&y) + 1e-9);
    }
}
