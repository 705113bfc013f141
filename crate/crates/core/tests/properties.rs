use std::collections::HashMap;

use crus::dataset::{AttributeSpec, ClassLabel, Dataset, Schema};
use crus::distance_clustering::{centroid_distance, kmeans_fit, mixed_distance, FeatureScaler};
use crus::metrics::{auc_roc, trapezoid_area};
use crus::resampling::{rus_undersample, smote_oversample, RusConfig, SmoteConfig};
use crus::stats_compare::{average_ranks, holm_adjust};
use proptest::prelude::*;

fn schema() -> Schema {
    Schema::new(
        vec![
            AttributeSpec::numeric("x"),
            AttributeSpec::nominal("colour", ["red", "green", "blue"]),
            AttributeSpec::numeric("z"),
        ],
        "label",
        "no",
        "yes",
    )
    .unwrap()
}

fn label(b: bool) -> ClassLabel {
    if b {
        ClassLabel::Positive
    } else {
        ClassLabel::Negative
    }
}

prop_compose! {
    fn row()(x in -1e6f64..1e6, c in 0usize..3, z in -50.0f64..50.0, pos in any::<bool>()) -> (Vec<f64>, ClassLabel) {
        (vec![x, c as f64, z], label(pos))
    }
}

prop_compose! {
    fn dataset(min: usize, max: usize)(rows in prop::collection::vec(row(), min..max)) -> Dataset {
        Dataset::from_rows(schema(), rows).unwrap()
    }
}

/// Dataset with at least `k` instances of each class.
fn balanced_enough(k: usize) -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(row(), k..k + 40), prop::collection::vec(row(), k..k + 40)).prop_map(|(mut neg, mut pos)| {
        neg.iter_mut().for_each(|r| r.1 = ClassLabel::Negative);
        pos.iter_mut().for_each(|r| r.1 = ClassLabel::Positive);
        neg.extend(pos);
        Dataset::from_rows(schema(), neg).unwrap()
    })
}

fn multiset(d: &Dataset) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for x in &d.instances {
        *m.entry(format!("{:?}{:?}", x.values, x.label)).or_insert(0) += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(d in dataset(0, 40)) {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), schema()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn folds_partition_and_stratify(d in balanced_enough(5), k in 2usize..6, seed in any::<u64>()) {
        let split = d.stratified_kfold(k, seed).unwrap();
        let mut seen = vec![0; d.len()];
        for f in 0..k {
            let test = split.test_indices(f);
            let train = split.train_indices(f);
            prop_assert_eq!(test.len() + train.len(), d.len());
            for &i in &test {
                seen[i] += 1;
                prop_assert!(!train.contains(&i));
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for class in [ClassLabel::Negative, ClassLabel::Positive] {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| split.test_indices(f).iter().filter(|&&i| d.instances[i].label == class).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "{:?}", per_fold);
        }
        let sizes = split.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(d.stratified_kfold(k, seed).unwrap(), split);
    }

    #[test]
    fn distance_is_a_symmetric_premetric(d in dataset(2, 30), i in 0usize..30, j in 0usize..30) {
        let scaler = FeatureScaler::fit(&d);
        let a = &d.instances[i % d.len()];
        let b = &d.instances[j % d.len()];
        let ab = mixed_distance(a, b, &scaler).unwrap();
        let ba = mixed_distance(b, a, &scaler).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(mixed_distance(a, a, &scaler).unwrap(), 0.0);
        // at most one unit per attribute after normalization
        prop_assert!(ab <= (d.schema.n_attributes() as f64).sqrt() + 1e-12);
    }

    #[test]
    fn kmeans_assigns_to_nearest_centroid(d in dataset(4, 40), k in 2usize..4, seed in any::<u64>()) {
        let m = kmeans_fit(&d, k, seed, 100).unwrap();
        prop_assert_eq!(m.assignments.len(), d.len());
        if m.converged {
            for (x, &c) in d.instances.iter().zip(&m.assignments) {
                let own = centroid_distance(x, &m.centroids[c], &m.scaler).unwrap();
                for other in &m.centroids {
                    prop_assert!(own <= centroid_distance(x, other, &m.scaler).unwrap() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn auc_equals_trapezoid_and_ignores_monotone_maps(
        pairs in prop::collection::vec((any::<bool>(), 0u8..20), 2..80),
    ) {
        let truth: Vec<ClassLabel> = pairs.iter().map(|p| label(p.0)).collect();
        prop_assume!(truth.iter().any(|t| t.is_positive()) && truth.iter().any(|t| !t.is_positive()));
        let scores: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 19.0).collect();
        let roc = auc_roc(&truth, &scores).unwrap();
        prop_assert!((roc.auc - trapezoid_area(&roc.curve)).abs() < 1e-12);
        prop_assert_eq!(roc.curve.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.curve.last().copied(), Some((1.0, 1.0)));
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert!((auc_roc(&truth, &mapped).unwrap().auc - roc.auc).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc_roc(&truth, &flipped).unwrap().auc - (1.0 - roc.auc)).abs() < 1e-12);
    }

    #[test]
    fn holm_is_monotone_and_bounded(p in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let adj = holm_adjust(&p);
        for i in 0..p.len() {
            prop_assert!(adj[i] >= p[i] && adj[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn average_ranks_sum(values in prop::collection::vec(0u8..5, 1..15)) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let r = average_ranks(&v);
        let n = v.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rus_keeps_a_sub_multiset(d in balanced_enough(1), spread in 0.25f64..6.0, seed in any::<u64>()) {
        let out = rus_undersample(&d, &RusConfig::new(spread, seed)).unwrap();
        let (neg, pos) = d.class_counts();
        let (out_neg, out_pos) = out.class_counts();
        prop_assert_eq!(out_pos, pos);
        prop_assert_eq!(out_neg, neg.min((spread * pos as f64).floor() as usize));
        let before = multiset(&d);
        for (key, n) in multiset(&out) {
            prop_assert!(before.get(&key).copied().unwrap_or(0) >= n);
        }
    }

    #[test]
    fn smote_extends_the_input(d in balanced_enough(6), pct in 1u32..600, seed in any::<u64>()) {
        let out = smote_oversample(&d, &SmoteConfig::new(pct, seed)).unwrap();
        let (neg, pos) = d.class_counts();
        prop_assert_eq!(&out.instances[..d.len()], &d.instances[..]);
        prop_assert_eq!(out.class_counts(), (neg, pos + pct as usize * pos / 100));
        let minority: Vec<_> = d.instances.iter().filter(|x| x.label.is_positive()).collect();
        for s in &out.instances[d.len()..] {
            prop_assert!(s.is_synthetic() && s.label.is_positive());
            for a in [0, 2] {
                let lo = minority.iter().map(|x| x.values[a]).fold(f64::INFINITY, f64::min);
                let hi = minority.iter().map(|x| x.values[a]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(s.values[a] >= lo - 1e-9 && s.values[a] <= hi + 1e-9);
            }
            prop_assert!(minority.iter().any(|x| x.values[1] == s.values[1]));
        }
    }
}
