//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a non-zero status if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use crus::dataset::{AttributeSpec, ClassLabel, Dataset, Schema};
use crus::ensembles::{
    bootstrap_counts, fit_adaboost_traced, theoretical_ensemble_accuracy, ClassifierSpec, ModelFile, TrainedModel,
};
use crus::evaluation::{gen_synthetic, run_cv, BlobSpec, CvResult, ExperimentSpec, SamplerSpec, SyntheticConfig};
use crus::metrics::{auc_roc, g_mean, op_from_rates, optimized_precision, trapezoid_area, ConfusionMatrix, MetricsReport};
use crus::stats_compare::{
    average_combined_loss, compare, friedman_test, holm_adjust, loss_vs_best, wilcoxon_from_differences, ScoreMatrix,
};
use crus::trees::{fit_tree, prune, AttributeSampling, TreeConfig};
use crus::{par, seeding};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("optimized precision and G-mean fixture", c1_op_gmean_fixture),
        ("loss-vs-best and combined-loss fixtures", c2_loss_fixtures),
        ("metric oracle suite", c3_metric_oracles),
        ("ensemble accuracy vs outcome enumeration", c4_condorcet),
        ("no leakage across 100 SMOTE CV runs", c5_leakage),
        ("clustering-RUS equivalence and effect", c6_clustering_rus),
        ("bootstrap fraction and OOB coverage", c7_bootstrap),
        ("AdaBoost.M1 hand trace", c8_adaboost_trace),
        ("statistics oracles", c9_statistics),
        ("tree correctness", c10_trees),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} [{detail}] ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name} [{why}] ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_op_gmean_fixture() -> Check {
    let (acc, gm, pos, total): (f64, f64, f64, f64) = (0.941, 0.532, 311.0, 4616.0);
    let p = pos / total;
    // acc = p tpr + (1 - p) tnr and gm^2 = tpr tnr; the smaller root keeps tnr <= 1
    let disc = acc * acc - 4.0 * p * (1.0 - p) * gm * gm;
    let tpr = (acc - disc.sqrt()) / (2.0 * p);
    let tnr = (acc - p * tpr) / (1.0 - p);
    ensure!((0.0..=1.0).contains(&tpr) && (0.0..=1.0).contains(&tnr), "tpr {tpr}, tnr {tnr}");
    let op = op_from_rates(acc, tpr, tnr);
    ensure!(close(op, 0.390, 0.005), "OP from rates {op:.4}");

    let tp = (tpr * pos).round() as u64;
    let tn = (tnr * (total - pos)).round() as u64;
    let cm = ConfusionMatrix::new(tp, (total - pos) as u64 - tn, tn, pos as u64 - tp);
    let op_cm = optimized_precision(&cm);
    let gm_cm = g_mean(&cm);
    ensure!(close(op_cm, 0.390, 0.005), "OP from counts {op_cm:.4}");
    ensure!(close(gm_cm, 0.532, 0.002), "G-mean from counts {gm_cm:.4}");
    Ok(format!("tpr {tpr:.4}, tnr {tnr:.4}, OP {op:.4}, G-mean {gm_cm:.4}"))
}

fn c2_loss_fixtures() -> Check {
    let a = average_combined_loss(2.65, 1.75);
    let b = average_combined_loss(0.65, 24.05);
    ensure!(format!("{a:.2}") == "2.20" && close(a, 2.20, 1e-12), "bagging-random tree {a}");
    ensure!(format!("{b:.2}") == "12.35" && close(b, 12.35, 1e-12), "J48 RUS {b}");

    // accuracy row of the table, best cell 0.92
    let accuracy = [0.91, 0.91, 0.87, 0.89, 0.91, 0.92, 0.91, 0.90];
    let losses = loss_vs_best(&accuracy, true).map_err(|e| e.to_string())?;
    ensure!(losses[5] == 0.0, "best cell loss {}", losses[5]);
    let rt = losses[2];
    ensure!(close(rt, 5.65, 0.25), "random tree RUS loss {rt:.4} vs published 5.65");
    Ok(format!("2.20, 12.35, best 0.00, random tree {rt:.2} vs 5.65"))
}

struct Oracle {
    tp: f64,
    fp: f64,
    tn: f64,
    fn_: f64,
}

fn div0(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn brute_auc(truth: &[ClassLabel], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, ti) in truth.iter().enumerate() {
        for (j, tj) in truth.iter().enumerate() {
            if ti.is_positive() && !tj.is_positive() {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn c3_metric_oracles() -> Check {
    let mut rng = seeding::rng(20_240_301);
    let mut auc_cases = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..80);
        let prior = rng.random_range(0.05..0.95);
        let truth: Vec<ClassLabel> = (0..n)
            .map(|_| if rng.random_bool(prior) { ClassLabel::Positive } else { ClassLabel::Negative })
            .collect();
        // coarse grid so that ties are common
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..11) as f64) / 10.0).collect();
        let cut = rng.random_range(0..11) as f64 / 10.0;
        let predicted: Vec<ClassLabel> = scores
            .iter()
            .map(|&s| if s > cut { ClassLabel::Positive } else { ClassLabel::Negative })
            .collect();

        let mut o = Oracle {
            tp: 0.0,
            fp: 0.0,
            tn: 0.0,
            fn_: 0.0,
        };
        for (t, p) in truth.iter().zip(&predicted) {
            match (t.is_positive(), p.is_positive()) {
                (true, true) => o.tp += 1.0,
                (false, true) => o.fp += 1.0,
                (false, false) => o.tn += 1.0,
                (true, false) => o.fn_ += 1.0,
            }
        }
        let total = n as f64;
        let precision = div0(o.tp, o.tp + o.fp);
        let recall = div0(o.tp, o.tp + o.fn_);
        let f1 = div0(2.0 * precision * recall, precision + recall);
        let tnr = div0(o.tn, o.tn + o.fp);
        let fpr = div0(o.fp, o.fp + o.tn);
        let accuracy = (o.tp + o.tn) / total;
        let gm = (recall * tnr).sqrt();
        let op = if recall + tnr == 0.0 {
            accuracy - 1.0
        } else {
            accuracy - (tnr - recall).abs() / (tnr + recall)
        };
        let prec_neg = div0(o.tn, o.tn + o.fn_);
        let f_neg = div0(2.0 * prec_neg * tnr, prec_neg + tnr);
        let (np, nn) = (o.tp + o.fn_, o.tn + o.fp);
        let w_prec = (precision * np + prec_neg * nn) / total;
        let w_rec = (recall * np + tnr * nn) / total;
        let w_f = (f1 * np + f_neg * nn) / total;

        let r = MetricsReport::from_predictions(&truth, &predicted, &scores, 1.0).map_err(|e| e.to_string())?;
        let pairs = [
            ("precision", r.precision_pos, precision),
            ("recall", r.recall_pos, recall),
            ("f-measure", r.f_measure_pos, f1),
            ("tpr", r.tpr, recall),
            ("tnr", r.tnr, tnr),
            ("fpr", r.fpr, fpr),
            ("accuracy", r.accuracy, accuracy),
            ("g-mean", r.g_mean, gm),
            ("op", r.op, op),
            ("weighted precision", r.weighted_precision, w_prec),
            ("weighted recall", r.weighted_recall, w_rec),
            ("weighted f", r.weighted_f, w_f),
        ];
        for (name, got, want) in pairs {
            ensure!(close(got, want, 1e-9), "case {case}: {name} {got} vs {want}");
        }
        if np > 0.0 && nn > 0.0 {
            auc_cases += 1;
            let want = brute_auc(&truth, &scores);
            let got = r.auc.ok_or(format!("case {case}: AUC missing"))?;
            ensure!(close(got, want, 1e-9), "case {case}: AUC {got} vs {want}");
            let roc = auc_roc(&truth, &scores).map_err(|e| e.to_string())?;
            let area = trapezoid_area(&roc.curve);
            ensure!(close(area, want, 1e-9), "case {case}: curve area {area} vs {want}");
        } else {
            ensure!(r.auc.is_none(), "case {case}: AUC on a single-class sample");
        }
    }
    Ok(format!("1000 cases, {auc_cases} with AUC"))
}

fn c4_condorcet() -> Check {
    let ps: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for &p in &ps {
        let mut prev: Option<f64> = None;
        for l in (1..=15).step_by(2) {
            let mut want = 0.0;
            for mask in 0u32..(1 << l) {
                let right = mask.count_ones() as i32;
                if 2 * right > l as i32 {
                    want += p.powi(right) * (1.0 - p).powi(l as i32 - right);
                }
            }
            let got = theoretical_ensemble_accuracy(l, p).map_err(|e| e.to_string())?;
            ensure!(close(got, want, 1e-12), "L {l}, p {p}: {got} vs {want}");
            if let Some(prev) = prev {
                if p > 0.5 {
                    ensure!(got > prev, "not increasing at L {l}, p {p}");
                } else if p < 0.5 {
                    ensure!(got < prev, "not decreasing at L {l}, p {p}");
                }
            }
            prev = Some(got);
        }
    }
    Ok("odd L <= 15, p = 0.1..0.9".into())
}

fn blobs(sizes: usize, seed: u64) -> Dataset {
    let cfg = SyntheticConfig::new(
        vec![
            BlobSpec {
                size: sizes,
                imbalance_ratio: 2.0,
            },
            BlobSpec {
                size: sizes,
                imbalance_ratio: 20.0,
            },
        ],
        seed,
    );
    gen_synthetic(&cfg).expect("valid synthetic config").dataset
}

fn c5_leakage() -> Check {
    let data = blobs(150, 77);
    let mut synthetic_trained = 0;
    for run in 0..100u64 {
        let spec = ExperimentSpec::new(
            SamplerSpec::Smote {
                percentage: if run % 2 == 0 { 100 } else { 500 },
                k_neighbors: 5,
            },
            ClassifierSpec::j48(),
            run,
        );
        let r = run_cv(&data, &spec).map_err(|e| e.to_string())?;
        let mut seen = vec![false; data.len()];
        for f in &r.folds {
            synthetic_trained += f.train_synthetic;
            for rec in &f.records {
                ensure!(!rec.synthetic, "run {run} fold {}: synthetic test instance", f.fold);
                ensure!(
                    f.train_indices.binary_search(&rec.index).is_err(),
                    "run {run} fold {}: index {} in train and test",
                    f.fold,
                    rec.index
                );
                ensure!(!seen[rec.index], "run {run}: index {} tested twice", rec.index);
                seen[rec.index] = true;
            }
        }
        ensure!(seen.iter().all(|&s| s), "run {run}: not every instance was tested");
    }
    ensure!(synthetic_trained > 0, "SMOTE produced no synthetic training instances");
    Ok(format!("100 runs, {synthetic_trained} synthetic training instances, none tested"))
}

fn same_records(a: &CvResult, b: &CvResult) -> bool {
    a.records()
        .zip(b.records())
        .all(|(x, y)| x.index == y.index && x.truth == y.truth && x.predicted == y.predicted && x.score == y.score)
        && a.records().count() == b.records().count()
}

fn c6_clustering_rus() -> Check {
    // (a) threshold above every cluster IR
    let data = blobs(300, 5);
    let rf = ClassifierSpec::random_forest(10);
    let plain = run_cv(&data, &ExperimentSpec::new(SamplerSpec::None, rf.clone(), 11)).map_err(|e| e.to_string())?;
    let clustered = run_cv(&data, &ExperimentSpec::new(SamplerSpec::clustering_rus(2, 1e12, 4.0), rf, 11))
        .map_err(|e| e.to_string())?;
    ensure!(same_records(&plain, &clustered), "records differ from the no-resampling run");
    ensure!(
        clustered.headline() == &plain.pooled,
        "aggregate differs: {:?} vs {:?}",
        clustered.headline(),
        plain.pooled
    );

    // (b) two regions with IRs 2 and 20. G-mean and OP are not linear in the
    // records, so both sides are compared on pooled records; the
    // group-weighted view is reported alongside.
    let mut gm_wins = 0;
    let mut op_wins = 0;
    let mut weighted_gm_wins = 0;
    let mut balance_wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let data = blobs(1000, 100 + seed);
        let rf = ClassifierSpec::random_forest(50);
        let run = |sampler| run_cv(&data, &ExperimentSpec::new(sampler, rf.clone(), seed)).map_err(|e| e.to_string());
        let base = run(SamplerSpec::None)?.pooled;
        let rus = run(SamplerSpec::Rus { spread: 4.0 })?.pooled;
        let clustered = run(SamplerSpec::clustering_rus(2, 10.0, 4.0))?;
        let crus = clustered.pooled;
        gm_wins += (crus.g_mean > base.g_mean) as usize;
        op_wins += (crus.op > base.op) as usize;
        weighted_gm_wins += (clustered.headline().g_mean > base.g_mean) as usize;
        balance_wins += (base.accuracy - crus.accuracy <= base.accuracy - rus.accuracy) as usize;
        lines.push(format!(
            "seed {seed}: acc {:.4}/{:.4}/{:.4} gm {:.3}/{:.3}/{:.3} op {:.3}/{:.3}/{:.3}",
            base.accuracy, rus.accuracy, crus.accuracy, base.g_mean, rus.g_mean, crus.g_mean, base.op, rus.op, crus.op
        ));
    }
    let detail = format!(
        "G-mean wins {gm_wins}/5, OP wins {op_wins}/5, accuracy drop <= RUS drop {balance_wins}/5, \
         group-weighted G-mean wins {weighted_gm_wins}/5; none/rus/clustering: {}",
        lines.join("; ")
    );
    ensure!(gm_wins >= 4 && op_wins >= 4 && balance_wins >= 4, "{detail}");
    Ok(detail)
}

fn c7_bootstrap() -> Check {
    let mut rng = seeding::rng(7);
    let n = 1000;
    let mean: f64 = (0..100)
        .map(|_| bootstrap_counts(n, None, &mut rng).iter().filter(|&&c| c > 0).count() as f64 / n as f64)
        .sum::<f64>()
        / 100.0;
    ensure!(close(mean, 0.632, 0.02), "distinct fraction {mean:.4}");

    let data = blobs(500, 9);
    let model = ClassifierSpec::random_forest(50).fit(&data, None, 3).map_err(|e| e.to_string())?;
    let TrainedModel::Ensemble(e) = model else {
        return Err("random forest is not an ensemble".into());
    };
    let oob = e.oob.ok_or("no OOB estimate")?;
    ensure!(oob.coverage >= 0.99, "OOB coverage {:.4}", oob.coverage);
    Ok(format!("distinct fraction {mean:.4}, OOB coverage {:.4}", oob.coverage))
}

fn c8_adaboost_trace() -> Check {
    let schema = Schema::new(vec![AttributeSpec::numeric("x")], "y", "n", "p").map_err(|e| e.to_string())?;
    let rows = vec![
        (vec![1.0], ClassLabel::Positive),
        (vec![2.0], ClassLabel::Negative),
        (vec![3.0], ClassLabel::Negative),
        (vec![4.0], ClassLabel::Negative),
    ];
    let data = Dataset::from_rows(schema, rows).map_err(|e| e.to_string())?;
    let base = ClassifierSpec::Tree {
        tree: TreeConfig {
            use_pruning: false,
            ..TreeConfig::j48()
        },
    };
    let (model, trace) = fit_adaboost_traced(&data, None, 2, &base, 0).map_err(|e| e.to_string())?;
    ensure!(close(trace[0].error, 0.25, 1e-12), "round 1 error {}", trace[0].error);
    let beta = trace[0].beta.ok_or("round 1 stopped")?;
    ensure!(close(beta, 1.0 / 3.0, 1e-12), "beta {beta}");
    ensure!(close(model.members[0].1, 3f64.ln(), 1e-12), "member weight {}", model.members[0].1);
    let w = &trace.get(1).ok_or("no second round")?.weights;
    let want = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
    ensure!(w.iter().zip(want).all(|(a, b)| close(*a, b, 1e-12)), "round 2 weights {w:?}");
    Ok(format!("beta {beta:.6}, weight {:.6}, round 2 {w:.4?}", model.members[0].1))
}

fn enumerated_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        for &k in &order[i..=j] {
            ranks[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    let w: f64 = (0..n).filter(|&k| diffs[k] > 0.0).map(|k| ranks[k]).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        le += (s <= w + 1e-9) as u64;
        ge += (s >= w - 1e-9) as u64;
    }
    let total = (1u64 << n) as f64;
    (w, (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0))
}

fn c9_statistics() -> Check {
    let mut rng = seeding::rng(99);
    let mut cases = 0;
    for n in 1..=12 {
        for _ in 0..25 {
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let m = rng.random_range(1..6) as f64;
                    if rng.random_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            let (w, p) = enumerated_wilcoxon(&diffs);
            let r = wilcoxon_from_differences(&diffs, true).map_err(|e| e.to_string())?;
            ensure!(close(r.w_plus, w, 1e-9), "n {n}: W+ {} vs {w}", r.w_plus);
            ensure!(close(r.p_value, p, 1e-9), "n {n}: p {} vs {p} for {diffs:?}", r.p_value);
            cases += 1;
        }
    }

    let rows = vec![vec![0.9, 0.8, 0.7]; 4];
    let m = ScoreMatrix::new("acc", true, vec!["a".into(), "b".into(), "c".into()], rows).map_err(|e| e.to_string())?;
    let f = friedman_test(&m);
    ensure!(close(f.statistic, 8.0, 1e-12), "Friedman statistic {}", f.statistic);
    ensure!(close(f.p_value, 0.0183, 0.0005), "Friedman p {}", f.p_value);

    let holm = holm_adjust(&[0.01, 0.02, 0.04]);
    ensure!(
        holm.iter().zip([0.03, 0.04, 0.04]).all(|(a, b)| close(*a, b, 1e-12)),
        "Holm {holm:?}"
    );
    Ok(format!("{cases} Wilcoxon cases, Friedman chi2 {:.1} p {:.4}, Holm {holm:?}", f.statistic, f.p_value))
}

/// Consistent dataset: labels are a fixed function of the attribute values.
fn consistent_dataset(seed: u64) -> Dataset {
    let mut rng = seeding::rng(seed);
    let n_num = rng.random_range(1..4);
    let n_nom = rng.random_range(0..3);
    let mut attrs: Vec<AttributeSpec> = (0..n_num).map(|i| AttributeSpec::numeric(format!("x{i}"))).collect();
    for i in 0..n_nom {
        attrs.push(AttributeSpec::nominal(format!("g{i}"), ["a", "b", "c"]));
    }
    let schema = Schema::new(attrs, "y", "n", "p").expect("valid schema");
    let weights: Vec<f64> = (0..n_num + n_nom).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = rng.random_range(20..120);
    let rows = (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..n_num).map(|_| rng.random_range(0..20) as f64 / 2.0).collect();
            v.extend((0..n_nom).map(|_| rng.random_range(0..3) as f64));
            // a non-linear rule keeps the trees deep
            let s: f64 = v.iter().zip(&weights).map(|(a, w)| (a * w).sin()).sum();
            let label = if s > 0.0 { ClassLabel::Positive } else { ClassLabel::Negative };
            (v, label)
        })
        .collect();
    Dataset::from_rows(schema, rows).expect("valid rows")
}

fn c10_trees() -> Check {
    let unpruned = TreeConfig {
        min_leaf_weight: 1.0,
        use_pruning: false,
        attribute_sampling: AttributeSampling::All,
        ..TreeConfig::j48()
    };
    let mut nodes = 0;
    for seed in 0..20 {
        let d = consistent_dataset(seed);
        let t = fit_tree(&d, None, &unpruned).map_err(|e| e.to_string())?;
        let wrong = d.instances.iter().filter(|x| t.predict(&x.values).label != x.label).count();
        ensure!(wrong == 0, "dataset {seed}: {wrong} training errors");
        nodes += t.node_count();

        let pruned = prune(t.clone(), 0.25);
        ensure!(pruned.node_count() <= t.node_count(), "dataset {seed}: pruning grew the tree");
        let full = fit_tree(&d, None, &TreeConfig { use_pruning: false, ..TreeConfig::j48() }).map_err(|e| e.to_string())?;
        let j48 = fit_tree(&d, None, &TreeConfig::j48()).map_err(|e| e.to_string())?;
        ensure!(j48.node_count() <= full.node_count(), "dataset {seed}: pruned J48 larger than unpruned");
    }

    let schema = Schema::new(
        vec![AttributeSpec::nominal("a", ["0", "1"]), AttributeSpec::nominal("b", ["0", "1"])],
        "y",
        "n",
        "p",
    )
    .map_err(|e| e.to_string())?;
    let xor = |a: usize, b: usize| if a != b { ClassLabel::Positive } else { ClassLabel::Negative };
    let rows = (0..4).map(|i| (vec![(i / 2) as f64, (i % 2) as f64], xor(i / 2, i % 2))).collect();
    let d = Dataset::from_rows(schema, rows).map_err(|e| e.to_string())?;
    let t = fit_tree(&d, None, &unpruned).map_err(|e| e.to_string())?;
    ensure!(d.instances.iter().all(|x| t.predict(&x.values).label == x.label), "XOR not learned");

    let num = Schema::new(vec![AttributeSpec::numeric("a"), AttributeSpec::numeric("b")], "y", "n", "p")
        .map_err(|e| e.to_string())?;
    let rows = (0..4).map(|i| (vec![(i / 2) as f64, (i % 2) as f64], xor(i / 2, i % 2))).collect();
    let d = Dataset::from_rows(num, rows).map_err(|e| e.to_string())?;
    let t = fit_tree(&d, None, &unpruned).map_err(|e| e.to_string())?;
    ensure!(d.instances.iter().all(|x| t.predict(&x.values).label == x.label), "numeric XOR not learned");
    Ok(format!("20 datasets, {nodes} nodes in total, XOR learned"))
}

fn experiment_bytes(data: &Dataset) -> Result<String, String> {
    let specs = [
        ExperimentSpec::new(SamplerSpec::clustering_rus(2, 10.0, 4.0), ClassifierSpec::random_forest(10), 3),
        ExperimentSpec::new(
            SamplerSpec::Smote {
                percentage: 200,
                k_neighbors: 5,
            },
            ClassifierSpec::adaboost(5, ClassifierSpec::random_tree()),
            3,
        ),
        ExperimentSpec::new(
            SamplerSpec::Rus { spread: 4.0 },
            ClassifierSpec::bagging(5, ClassifierSpec::j48()),
            3,
        ),
    ];
    let mut out = String::new();
    let mut scores = Vec::new();
    for spec in &specs {
        let r = run_cv(data, spec).map_err(|e| e.to_string())?;
        scores.push(r.folds.iter().map(|f| f.metrics.g_mean).collect::<Vec<_>>());
        out.push_str(&serde_json::to_string(&r).map_err(|e| e.to_string())?);
    }
    let rows: Vec<Vec<f64>> = (0..scores[0].len()).map(|i| scores.iter().map(|s| s[i]).collect()).collect();
    let m = ScoreMatrix::new("g_mean", true, vec!["a".into(), "b".into(), "c".into()], rows).map_err(|e| e.to_string())?;
    let report = compare(&m, 0.05).map_err(|e| e.to_string())?;
    out.push_str(&serde_json::to_string(&report).map_err(|e| e.to_string())?);

    let spec = ClassifierSpec::random_committee(5, ClassifierSpec::random_forest(5));
    let model = spec.fit(data, None, 8).map_err(|e| e.to_string())?;
    let file = ModelFile {
        schema: (*data.schema).clone(),
        spec,
        model,
    };
    out.push_str(&file.to_json());
    Ok(out)
}

fn c11_determinism() -> Check {
    let data = blobs(200, 21);
    let first = experiment_bytes(&data)?;
    let second = experiment_bytes(&data)?;
    ensure!(first == second, "two runs differ");

    let was = par::is_parallel();
    par::set_parallel(false);
    let sequential = experiment_bytes(&data);
    par::set_parallel(was);
    ensure!(sequential? == first, "sequential run differs from parallel run");

    #[cfg(feature = "parallel")]
    {
        for threads in [1, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| e.to_string())?;
            let bytes = pool.install(|| experiment_bytes(&data))?;
            ensure!(bytes == first, "run on {threads} threads differs");
        }
    }
    Ok(format!("{} bytes identical across repeats, thread counts and modes", first.len()))
}
