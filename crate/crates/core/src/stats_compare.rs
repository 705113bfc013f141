//! Rank-based comparison of several classifier/sampler pairs.
//!
//! A [`ScoreMatrix`] holds one metric for every (block, treatment) cell, where
//! blocks are CV folds or datasets. The Friedman test checks whether any
//! treatment differs; pairwise Wilcoxon signed-rank tests with Holm's
//! step-down correction locate the differences, and the non-significant
//! cliques are drawn as bars in a critical-difference diagram.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled by the exact Wilcoxon
/// distribution; larger samples use the normal approximation.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub metric: String,
    pub higher_is_better: bool,
    pub treatments: Vec<String>,
    /// `rows[block][treatment]`.
    pub rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(metric: impl Into<String>, higher_is_better: bool, treatments: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = treatments.len();
        if k < 2 {
            return Err(Error::invalid("comparison needs at least 2 treatments"));
        }
        if rows.len() < 2 {
            return Err(Error::invalid("comparison needs at least 2 blocks"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch { left: k, right: r.len() });
        }
        if rows.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN in score matrix"));
        }
        Ok(Self {
            metric: metric.into(),
            higher_is_better,
            treatments,
            rows,
        })
    }

    pub fn n_treatments(&self) -> usize {
        self.treatments.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Within-block ranks, 1 = best, ties averaged.
    pub fn ranks(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let keyed: Vec<f64> = if self.higher_is_better {
                    row.iter().map(|v| -v).collect()
                } else {
                    row.clone()
                };
                average_ranks(&keyed)
            })
            .collect()
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        let ranks = self.ranks();
        let n = ranks.len() as f64;
        (0..self.n_treatments())
            .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

/// Ascending ranks starting at 1 with ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub average_ranks: Vec<f64>,
}

/// Friedman chi-square over average ranks:
/// `12 n / (k (k + 1)) * sum_j (R_j - (k + 1) / 2)^2`, `k - 1` degrees of freedom.
pub fn friedman_test(m: &ScoreMatrix) -> FriedmanResult {
    let k = m.n_treatments() as f64;
    let n = m.rows.len() as f64;
    let average_ranks = m.average_ranks();
    let center = (k + 1.0) / 2.0;
    let dev: f64 = average_ranks.iter().map(|r| (r - center).powi(2)).sum();
    let statistic = 12.0 * n / (k * (k + 1.0)) * dev;
    let df = m.n_treatments() - 1;
    let p_value = if statistic <= 1e-12 {
        1.0
    } else {
        ChiSquared::new(df as f64).map_or(1.0, |c| c.sf(statistic))
    };
    FriedmanResult {
        statistic,
        df,
        p_value,
        average_ranks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of ranks of the positive differences `a - b`.
    pub w_plus: f64,
    pub n_nonzero: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test of paired samples.
///
/// Zero differences are dropped and tied magnitudes get average ranks. Up to
/// [`WILCOXON_EXACT_MAX`] non-zero differences the null distribution of `W+`
/// is computed exactly (by counting sign assignments over the actual,
/// possibly tied, ranks); beyond that a tie-corrected normal approximation
/// with continuity correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    wilcoxon_from_differences(&diffs, diffs.len() <= WILCOXON_EXACT_MAX)
}

/// Signed-rank test of non-zero differences, forcing the exact or the
/// normal branch.
pub fn wilcoxon_from_differences(diffs: &[f64], exact: bool) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            n_nonzero: 0,
            exact,
        });
    }
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let p_value = if exact {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&ranks, w_plus)
    };
    Ok(WilcoxonResult {
        p_value,
        w_plus,
        n_nonzero: n,
        exact,
    })
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    // doubled ranks are integers even with ties
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * Normal::standard().sf(z)).min(1.0)
}

/// Holm's step-down adjustment, returned in the input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let v = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(v);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: String,
    pub higher_is_better: bool,
    pub treatments: Vec<String>,
    pub friedman: FriedmanResult,
    /// Symmetric matrices with 1 on the diagonal.
    pub pairwise_raw: Vec<Vec<f64>>,
    pub pairwise_holm: Vec<Vec<f64>>,
    pub alpha: f64,
    /// Maximal groups of treatments with no significant pairwise difference,
    /// in rank order. Treatments that differ from all others form singletons.
    pub cliques: Vec<Vec<usize>>,
}

/// Friedman test, all pairwise Wilcoxon tests with Holm correction, and the
/// non-significant cliques at `alpha`.
pub fn compare(m: &ScoreMatrix, alpha: f64) -> Result<ComparisonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let k = m.n_treatments();
    let friedman = friedman_test(m);
    let columns: Vec<Vec<f64>> = (0..k).map(|j| m.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let raw: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| wilcoxon_signed_rank(&columns[i], &columns[j]).map(|w| w.p_value))
        .collect::<Result<_>>()?;
    let adjusted = holm_adjust(&raw);
    let mut pairwise_raw = vec![vec![1.0; k]; k];
    let mut pairwise_holm = vec![vec![1.0; k]; k];
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        pairwise_raw[i][j] = raw[idx];
        pairwise_raw[j][i] = raw[idx];
        pairwise_holm[i][j] = adjusted[idx];
        pairwise_holm[j][i] = adjusted[idx];
    }
    let cliques = nonsignificant_cliques(&friedman.average_ranks, &pairwise_holm, alpha);
    Ok(ComparisonReport {
        metric: m.metric.clone(),
        higher_is_better: m.higher_is_better,
        treatments: m.treatments.clone(),
        friedman,
        pairwise_raw,
        pairwise_holm,
        alpha,
        cliques,
    })
}

/// Treatment indices sorted by average rank, ties by index.
fn rank_order(average_ranks: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..average_ranks.len()).collect();
    order.sort_by(|&a, &b| average_ranks[a].total_cmp(&average_ranks[b]).then(a.cmp(&b)));
    order
}

/// Greedy interval cliques over the rank-sorted treatments: for each start,
/// extend while every pair inside stays non-significant; keep intervals not
/// contained in an earlier one.
pub fn nonsignificant_cliques(average_ranks: &[f64], p_adjusted: &[Vec<f64>], alpha: f64) -> Vec<Vec<usize>> {
    let order = rank_order(average_ranks);
    let k = order.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut covered_to: Option<usize> = None;
    for i in 0..k {
        let mut j = i;
        while j + 1 < k && (i..=j).all(|a| p_adjusted[order[a]][order[j + 1]] >= alpha) {
            j += 1;
        }
        if covered_to.is_none_or(|c| j > c) {
            out.push(order[i..=j].to_vec());
            covered_to = Some(j);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdDiagram {
    pub metric: String,
    pub n_treatments: usize,
    /// `(label, average rank)` in rank order.
    pub entries: Vec<(String, f64)>,
    /// Bars as `(lowest rank, highest rank, member labels)`.
    pub bars: Vec<(f64, f64, Vec<String>)>,
}

/// Layout of a critical-difference diagram: one bar per non-significant
/// clique of two or more treatments.
pub fn cd_diagram(report: &ComparisonReport, alpha: f64) -> CdDiagram {
    let ranks = &report.friedman.average_ranks;
    let cliques = nonsignificant_cliques(ranks, &report.pairwise_holm, alpha);
    let entries = rank_order(ranks)
        .into_iter()
        .map(|i| (report.treatments[i].clone(), ranks[i]))
        .collect();
    let bars = cliques
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let lo = c.iter().map(|&i| ranks[i]).fold(f64::INFINITY, f64::min);
            let hi = c.iter().map(|&i| ranks[i]).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi, c.iter().map(|&i| report.treatments[i].clone()).collect())
        })
        .collect();
    CdDiagram {
        metric: report.metric.clone(),
        n_treatments: report.treatments.len(),
        entries,
        bars,
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl CdDiagram {
    pub fn to_text(&self) -> String {
        let mut s = format!("critical difference diagram: {}\n", self.metric);
        let width = self.entries.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        for (label, rank) in &self.entries {
            let _ = writeln!(s, "  {label:<width$}  {rank:.3}");
        }
        if self.bars.is_empty() {
            s.push_str("no non-significant groups\n");
        }
        for (lo, hi, members) in &self.bars {
            let _ = writeln!(s, "  bar [{lo:.3}, {hi:.3}]: {}", members.join(", "));
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let k = self.n_treatments.max(2) as f64;
        let (left, right) = (160.0, 640.0);
        let axis_y = 60.0;
        let x_of = |r: f64| left + (r - 1.0) / (k - 1.0) * (right - left);
        let half = self.entries.len().div_ceil(2);
        let label_rows = half.max(self.entries.len() - half);
        let bar_area = 20.0 + 12.0 * self.bars.len() as f64;
        let height = axis_y + bar_area + 22.0 * label_rows as f64 + 30.0;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="{height:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<text x="400" y="18" text-anchor="middle">{}</text>"#, xml_escape(&self.metric));
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{axis_y}" x2="{right}" y2="{axis_y}" stroke="black"/>"#
        );
        for r in 1..=self.n_treatments {
            let x = x_of(r as f64);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{axis_y}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{r}</text>"#,
                axis_y - 6.0,
                axis_y - 10.0
            );
        }
        for (b, (lo, hi, _)) in self.bars.iter().enumerate() {
            let y = axis_y + 14.0 + 12.0 * b as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="4"/>"#,
                x_of(*lo) - 3.0,
                x_of(*hi) + 3.0
            );
        }
        let base = axis_y + bar_area;
        for (idx, (label, rank)) in self.entries.iter().enumerate() {
            let x = x_of(*rank);
            let (row, to_left) = if idx < half { (idx, true) } else { (self.entries.len() - 1 - idx, false) };
            let y = base + 22.0 * row as f64 + 10.0;
            let (tx, anchor) = if to_left { (left - 10.0, "end") } else { (right + 10.0, "start") };
            let _ = writeln!(
                s,
                r#"<polyline points="{x:.2},{axis_y} {x:.2},{y:.2} {tx:.2},{y:.2}" fill="none" stroke="gray"/><text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{} ({rank:.2})</text>"#,
                if to_left { tx - 4.0 } else { tx + 4.0 },
                y + 4.0,
                xml_escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Percentage loss of each value with respect to the best one:
/// `100 (best - v) / best` (or `100 (v - best) / best` when lower is better).
pub fn loss_vs_best(values: &[f64], higher_is_better: bool) -> Result<Vec<f64>> {
    let best = if higher_is_better {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    if values.is_empty() || !best.is_finite() {
        return Err(Error::invalid("loss_vs_best needs finite values"));
    }
    if best == 0.0 {
        return Err(Error::invalid("best value is 0; relative loss undefined"));
    }
    Ok(values
        .iter()
        .map(|v| {
            let diff = if higher_is_better { best - v } else { v - best };
            100.0 * diff / best.abs()
        })
        .collect())
}

/// Mean of two percentage losses.
pub fn average_combined_loss(loss_a: f64, loss_b: f64) -> f64 {
    (loss_a + loss_b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        let k = rows[0].len();
        ScoreMatrix::new("m", true, (0..k).map(|i| format!("t{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn friedman_fixture() {
        let m = matrix(vec![vec![0.9, 0.8, 0.7]; 4]);
        let f = friedman_test(&m);
        assert_eq!(f.average_ranks, vec![1.0, 2.0, 3.0]);
        assert!((f.statistic - 8.0).abs() < 1e-12);
        assert_eq!(f.df, 2);
        assert!((f.p_value - (-4f64).exp()).abs() < 1e-10);
        assert!((f.p_value - 0.0183).abs() < 5e-4);
    }

    #[test]
    fn friedman_degenerate_and_permutation() {
        let f = friedman_test(&matrix(vec![vec![0.5; 3]; 5]));
        assert_eq!((f.statistic, f.p_value), (0.0, 1.0));
        let rows = vec![vec![0.9, 0.7, 0.8], vec![0.6, 0.65, 0.7], vec![0.3, 0.1, 0.2]];
        let swapped: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        let a = friedman_test(&matrix(rows));
        let b = friedman_test(&matrix(swapped));
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert_eq!(b.average_ranks, vec![a.average_ranks[2], a.average_ranks[0], a.average_ranks[1]]);
    }

    #[test]
    fn wilcoxon_examples() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap().p_value, 1.0);
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!(w.exact);
        assert!((w.p_value - 0.0625).abs() < 1e-12);
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.2]), vec![0.2]);
        let adj = holm_adjust(&[0.01, 0.02, 0.04]);
        for (a, b) in adj.iter().zip([0.03, 0.04, 0.04]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(holm_adjust(&[0.5, 0.6, 0.9]).iter().all(|&p| p <= 1.0));
    }

    fn report_with(p: f64, extreme_only: bool) -> ComparisonReport {
        let mut holm = vec![vec![p; 3]; 3];
        if extreme_only {
            holm = vec![vec![0.5; 3]; 3];
            holm[0][2] = 0.001;
            holm[2][0] = 0.001;
        }
        ComparisonReport {
            metric: "m".into(),
            higher_is_better: true,
            treatments: vec!["a".into(), "b".into(), "c".into()],
            friedman: FriedmanResult {
                statistic: 0.0,
                df: 2,
                p_value: 1.0,
                average_ranks: vec![1.0, 2.0, 3.0],
            },
            pairwise_raw: holm.clone(),
            pairwise_holm: holm,
            alpha: 0.05,
            cliques: vec![],
        }
    }

    #[test]
    fn cd_bars() {
        assert!(cd_diagram(&report_with(0.001, false), 0.05).bars.is_empty());
        let all = cd_diagram(&report_with(0.5, false), 0.05);
        assert_eq!(all.bars.len(), 1);
        assert_eq!(all.bars[0].2, vec!["a", "b", "c"]);
        let ext = cd_diagram(&report_with(0.0, true), 0.05);
        let members: Vec<Vec<String>> = ext.bars.iter().map(|b| b.2.clone()).collect();
        assert_eq!(members, vec![vec!["a", "b"], vec!["b", "c"]]);
        assert!(ext.to_svg().starts_with("<svg"));
        assert!(ext.to_text().contains("bar [1.000, 2.000]: a, b"));
    }

    #[test]
    fn loss_examples() {
        let l = loss_vs_best(&[0.92, 0.46, 0.87], true).unwrap();
        assert_eq!(l[0], 0.0);
        assert!((l[1] - 50.0).abs() < 1e-12);
        assert!((l[2] - 5.434_782_608_695_652).abs() < 1e-9);
        assert_eq!(average_combined_loss(0.0, 0.0), 0.0);
        assert!((average_combined_loss(2.65, 1.75) - 2.2).abs() < 1e-12);
        assert!(loss_vs_best(&[], true).is_err());
    }
}
