//! Confusion-matrix metrics for imbalanced binary classification.
//!
//! The positive class is always the minority class. Cells that would divide
//! zero by zero evaluate to 0 and are reported in [`BinaryRates::degenerate`].

use serde::{Deserialize, Serialize};

use crate::dataset::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn add(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        match (truth, predicted) {
            (ClassLabel::Positive, ClassLabel::Positive) => self.tp += 1,
            (ClassLabel::Positive, ClassLabel::Negative) => self.fn_ += 1,
            (ClassLabel::Negative, ClassLabel::Positive) => self.fp += 1,
            (ClassLabel::Negative, ClassLabel::Negative) => self.tn += 1,
        }
    }
}

pub fn confusion_matrix(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("confusion matrix of zero instances"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.add(t, p);
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64, flag: &'static str, degenerate: &mut Vec<&'static str>) -> f64 {
    if den == 0 {
        degenerate.push(flag);
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryRates {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub accuracy: f64,
    /// Names of the quantities that hit a 0/0 and were set to 0.
    pub degenerate: Vec<&'static str>,
}

/// Precision, recall, F-beta, TPR, FPR, TNR and accuracy of the positive class.
pub fn binary_rates(cm: &ConfusionMatrix, beta: f64) -> BinaryRates {
    let mut degenerate = Vec::new();
    let precision = ratio(cm.tp, cm.tp + cm.fp, "precision", &mut degenerate);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall", &mut degenerate);
    let fpr = ratio(cm.fp, cm.fp + cm.tn, "fpr", &mut degenerate);
    let tnr = ratio(cm.tn, cm.fp + cm.tn, "tnr", &mut degenerate);
    let accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy", &mut degenerate);
    let b2 = beta * beta;
    let f_den = b2 * precision + recall;
    let f_measure = if f_den > 0.0 {
        (1.0 + b2) * precision * recall / f_den
    } else {
        degenerate.push("f_measure");
        0.0
    };
    BinaryRates {
        precision,
        recall,
        f_measure,
        tpr: recall,
        fpr,
        tnr,
        accuracy,
        degenerate,
    }
}

/// `sqrt(TPR * TNR)`.
pub fn g_mean(cm: &ConfusionMatrix) -> f64 {
    let r = binary_rates(cm, 1.0);
    (r.tpr * r.tnr).sqrt()
}

/// Optimized precision: `accuracy - |TNR - TPR| / (TNR + TPR)`, and
/// `accuracy - 1` when both rates are zero.
pub fn optimized_precision(cm: &ConfusionMatrix) -> f64 {
    let r = binary_rates(cm, 1.0);
    op_from_rates(r.accuracy, r.tpr, r.tnr)
}

pub fn op_from_rates(accuracy: f64, tpr: f64, tnr: f64) -> f64 {
    let sum = tnr + tpr;
    if sum <= 0.0 {
        accuracy - 1.0
    } else {
        accuracy - (tnr - tpr).abs() / sum
    }
}

/// `(n_pos * v_pos + n_neg * v_neg) / (n_pos + n_neg)`.
pub fn weighted_class_average(values: (f64, f64), counts: (u64, u64)) -> f64 {
    let (vp, vn) = values;
    let (np, nn) = counts;
    let total = np + nn;
    if total == 0 {
        return 0.0;
    }
    (np as f64 * vp + nn as f64 * vn) / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub curve: Vec<(f64, f64)>,
}

/// Area under the ROC curve as the Mann-Whitney statistic, plus the curve.
pub fn auc_roc(truth: &[ClassLabel], scores: &[f64]) -> Result<Roc> {
    if truth.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: scores.len(),
        });
    }
    let n_pos = truth.iter().filter(|t| t.is_positive()).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes in the truth labels"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // sum over tied groups of neg-below-pos pairs plus half of the ties
    let mut pairs = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]].is_positive() {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        // positives in this group beat every negative with a lower score
        pairs += gp as f64 * (n_neg - fp - gn) as f64 + 0.5 * gp as f64 * gn as f64;
        tp += gp;
        fp += gn;
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(Roc {
        auc: pairs / (n_pos as f64 * n_neg as f64),
        curve,
    })
}

/// Trapezoidal area under a curve of `(x, y)` points sorted by `x`.
pub fn trapezoid_area(curve: &[(f64, f64)]) -> f64 {
    curve.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Every metric reported per fold and per experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: u64,
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f_measure_pos: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub g_mean: f64,
    pub op: f64,
    /// `None` when the records hold a single class.
    pub auc: Option<f64>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f: f64,
}

/// Column order of the metric CSV files.
pub const METRIC_COLUMNS: [&str; 14] = [
    "n",
    "accuracy",
    "auc",
    "weighted_precision",
    "weighted_recall",
    "weighted_f",
    "g_mean",
    "op",
    "precision_pos",
    "recall_pos",
    "f_measure_pos",
    "tpr",
    "tnr",
    "fpr",
];

impl MetricsReport {
    pub fn from_predictions(truth: &[ClassLabel], predicted: &[ClassLabel], scores: &[f64], beta: f64) -> Result<Self> {
        let cm = confusion_matrix(truth, predicted)?;
        let auc = match auc_roc(truth, scores) {
            Ok(roc) => Some(roc.auc),
            Err(Error::InvalidArgument(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self::from_confusion(&cm, auc, beta))
    }

    pub fn from_confusion(cm: &ConfusionMatrix, auc: Option<f64>, beta: f64) -> Self {
        let pos = binary_rates(cm, beta);
        // the same rates with the negative class as "positive"
        let flipped = ConfusionMatrix::new(cm.tn, cm.fn_, cm.tp, cm.fp);
        let neg = binary_rates(&flipped, beta);
        let counts = (cm.positives(), cm.negatives());
        Self {
            n: cm.total(),
            accuracy: pos.accuracy,
            precision_pos: pos.precision,
            recall_pos: pos.recall,
            f_measure_pos: pos.f_measure,
            tpr: pos.tpr,
            fpr: pos.fpr,
            tnr: pos.tnr,
            g_mean: (pos.tpr * pos.tnr).sqrt(),
            op: op_from_rates(pos.accuracy, pos.tpr, pos.tnr),
            auc,
            weighted_precision: weighted_class_average((pos.precision, neg.precision), counts),
            weighted_recall: weighted_class_average((pos.recall, neg.recall), counts),
            weighted_f: weighted_class_average((pos.f_measure, neg.f_measure), counts),
        }
    }

    /// Metric value by CSV column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "n" => self.n as f64,
            "accuracy" => self.accuracy,
            "auc" => return self.auc,
            "weighted_precision" => self.weighted_precision,
            "weighted_recall" => self.weighted_recall,
            "weighted_f" | "f_measure" => self.weighted_f,
            "g_mean" => self.g_mean,
            "op" => self.op,
            "precision_pos" => self.precision_pos,
            "recall_pos" => self.recall_pos,
            "f_measure_pos" => self.f_measure_pos,
            "tpr" => self.tpr,
            "tnr" => self.tnr,
            "fpr" => self.fpr,
            _ => return None,
        })
    }

    /// Count-weighted mean of several reports (`n` as weight). AUC is
    /// averaged over the reports that have one.
    pub fn weighted_mean(reports: &[MetricsReport]) -> Option<Self> {
        Self::mean_with(reports, |r| r.n as f64)
    }

    /// Unweighted mean of several reports; `n` is the sum.
    pub fn mean(reports: &[MetricsReport]) -> Option<Self> {
        Self::mean_with(reports, |_| 1.0)
    }

    fn mean_with(reports: &[MetricsReport], weight: impl Fn(&MetricsReport) -> f64) -> Option<Self> {
        let total: f64 = reports.iter().map(&weight).sum();
        if reports.is_empty() || total <= 0.0 {
            return None;
        }
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(|r| weight(r) * f(r)).sum::<f64>() / total;
        let with_auc: Vec<&MetricsReport> = reports.iter().filter(|r| r.auc.is_some()).collect();
        let auc_total: f64 = with_auc.iter().map(|r| weight(r)).sum();
        let auc = (auc_total > 0.0)
            .then(|| with_auc.iter().map(|r| weight(r) * r.auc.unwrap_or(0.0)).sum::<f64>() / auc_total);
        Some(Self {
            n: reports.iter().map(|r| r.n).sum(),
            accuracy: avg(|r| r.accuracy),
            precision_pos: avg(|r| r.precision_pos),
            recall_pos: avg(|r| r.recall_pos),
            f_measure_pos: avg(|r| r.f_measure_pos),
            tpr: avg(|r| r.tpr),
            fpr: avg(|r| r.fpr),
            tnr: avg(|r| r.tnr),
            g_mean: avg(|r| r.g_mean),
            op: avg(|r| r.op),
            auc,
            weighted_precision: avg(|r| r.weighted_precision),
            weighted_recall: avg(|r| r.weighted_recall),
            weighted_f: avg(|r| r.weighted_f),
        })
    }

    /// Values in [`METRIC_COLUMNS`] order, formatted for CSV (`NA` for a
    /// missing AUC).
    pub fn csv_cells(&self) -> Vec<String> {
        METRIC_COLUMNS
            .iter()
            .map(|c| match (*c, self.get(c)) {
                ("n", Some(v)) => format!("{}", v as u64),
                (_, Some(v)) => format!("{v:.6}"),
                (_, None) => "NA".to_string(),
            })
            .collect()
    }
}
