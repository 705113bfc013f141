//! Attribute ranking by gain ratio, and correlation-based feature subset
//! selection (CFS) with best-first search.
//!
//! Numeric attributes are discretized into the binary split that minimizes
//! class entropy before they are scored. CFS uses symmetrical uncertainty as
//! its correlation measure.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::info::{gain_and_split_info, gain_ratio_of_branches, symmetrical_uncertainty};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttributes {
    /// `(attribute index, name, gain ratio)`, best first.
    pub entries: Vec<(usize, String, f64)>,
}

impl RankedAttributes {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,attribute,gain_ratio\n");
        for (r, (_, name, v)) in self.entries.iter().enumerate() {
            s.push_str(&format!("{},{name},{v:.6}\n", r + 1));
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| rank | attribute | gain ratio |\n|---:|---|---:|\n");
        for (r, (_, name, v)) in self.entries.iter().enumerate() {
            s.push_str(&format!("| {} | {name} | {v:.3} |\n", r + 1));
        }
        s
    }
}

/// A discretized view of the data: every attribute as small integer codes.
#[derive(Debug, Clone)]
pub struct DiscreteView {
    pub names: Vec<String>,
    pub columns: Vec<Vec<usize>>,
    pub arity: Vec<usize>,
    pub class: Vec<usize>,
}

/// Threshold of the binary split of `values` that maximizes information gain
/// about `class`, `None` if the column is constant.
pub fn best_binary_split(values: &[f64], class: &[usize]) -> Option<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut total = [0.0; 2];
    for &c in class {
        total[c] += 1.0;
    }
    let mut left = [0.0; 2];
    let mut best: Option<(f64, f64)> = None;
    for p in 0..order.len().saturating_sub(1) {
        left[class[order[p]]] += 1.0;
        let (v, next) = (values[order[p]], values[order[p + 1]]);
        if v >= next {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let (gain, _) = gain_and_split_info(&[left, right]);
        if best.is_none_or(|(g, _)| gain > g + 1e-12) {
            let mid = v + (next - v) / 2.0;
            best = Some((gain, if mid >= next { v } else { mid }));
        }
    }
    best.map(|(_, t)| t)
}

impl DiscreteView {
    pub fn new(data: &Dataset) -> Self {
        let class: Vec<usize> = data.instances.iter().map(|i| i.label.index()).collect();
        let mut columns = Vec::new();
        let mut arity = Vec::new();
        for (a, attr) in data.schema.attributes.iter().enumerate() {
            let raw: Vec<f64> = data.instances.iter().map(|i| i.values[a]).collect();
            match attr.arity() {
                Some(n) => {
                    columns.push(raw.iter().map(|&v| v as usize).collect());
                    arity.push(n);
                }
                None => {
                    let t = best_binary_split(&raw, &class);
                    columns.push(raw.iter().map(|&v| t.map_or(0, |t| usize::from(v > t))).collect());
                    arity.push(2);
                }
            }
        }
        Self {
            names: data.schema.attributes.iter().map(|a| a.name.clone()).collect(),
            columns,
            arity,
            class,
        }
    }

    fn table(&self, x: &[usize], x_arity: usize, y: &[usize], y_arity: usize) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; y_arity]; x_arity];
        for (&a, &b) in x.iter().zip(y) {
            t[a][b] += 1.0;
        }
        t
    }

    pub fn su_with_class(&self, a: usize) -> f64 {
        symmetrical_uncertainty(&self.table(&self.columns[a], self.arity[a], &self.class, 2))
    }

    pub fn su_between(&self, a: usize, b: usize) -> f64 {
        symmetrical_uncertainty(&self.table(&self.columns[a], self.arity[a], &self.columns[b], self.arity[b]))
    }

    pub fn gain_ratio(&self, a: usize) -> f64 {
        let mut branches = vec![[0.0; 2]; self.arity[a]];
        for (&v, &c) in self.columns[a].iter().zip(&self.class) {
            branches[v][c] += 1.0;
        }
        gain_ratio_of_branches(&branches).unwrap_or(0.0)
    }
}

fn check_two_classes(data: &Dataset) -> Result<()> {
    let (neg, pos) = data.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::invalid("feature selection needs both classes present"));
    }
    if data.schema.n_attributes() == 0 {
        return Err(Error::invalid("dataset has no attributes besides the class"));
    }
    Ok(())
}

/// Gain ratio of every attribute with respect to the class, best first
/// (ties by attribute index).
pub fn gain_ratio_rank(data: &Dataset) -> Result<RankedAttributes> {
    check_two_classes(data)?;
    let view = DiscreteView::new(data);
    let scores = par::map_range(view.columns.len(), |a| view.gain_ratio(a));
    let mut entries: Vec<(usize, String, f64)> = scores
        .into_iter()
        .enumerate()
        .map(|(a, v)| (a, view.names[a].clone(), v))
        .collect();
    entries.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)));
    Ok(RankedAttributes { entries })
}

/// Precomputed correlations for CFS.
#[derive(Debug, Clone)]
pub struct CfsEvaluator {
    pub names: Vec<String>,
    pub su_class: Vec<f64>,
    pub su_pair: Vec<Vec<f64>>,
}

impl CfsEvaluator {
    pub fn new(data: &Dataset) -> Result<Self> {
        check_two_classes(data)?;
        let view = DiscreteView::new(data);
        let n = view.columns.len();
        let su_class = par::map_range(n, |a| view.su_with_class(a));
        let su_pair = par::map_range(n, |a| (0..n).map(|b| if a == b { 1.0 } else { view.su_between(a, b) }).collect());
        Ok(Self {
            names: view.names,
            su_class,
            su_pair,
        })
    }

    /// `k r_cf / sqrt(k + k (k - 1) r_ff)` with mean attribute-class and mean
    /// attribute-attribute symmetrical uncertainty.
    pub fn merit(&self, subset: &[usize]) -> f64 {
        let k = subset.len();
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        let r_cf = subset.iter().map(|&a| self.su_class[a]).sum::<f64>() / kf;
        let r_ff = if k > 1 {
            let mut sum = 0.0;
            for (i, &a) in subset.iter().enumerate() {
                for &b in &subset[i + 1..] {
                    sum += self.su_pair[a][b];
                }
            }
            sum / (kf * (kf - 1.0) / 2.0)
        } else {
            0.0
        };
        let denom = (kf + kf * (kf - 1.0) * r_ff).sqrt();
        if denom > 0.0 {
            kf * r_cf / denom
        } else {
            0.0
        }
    }
}

pub fn cfs_merit(subset: &[usize], data: &Dataset) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::invalid("CFS merit of an empty subset"));
    }
    let n = data.schema.n_attributes();
    if let Some(&a) = subset.iter().find(|&&a| a >= n) {
        return Err(Error::invalid(format!("attribute index {a} out of range")));
    }
    Ok(CfsEvaluator::new(data)?.merit(subset))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfsResult {
    /// Selected attribute indices, ascending.
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    pub merit: f64,
    pub evaluated: usize,
}

impl CfsResult {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "Evaluated subsets: {}\n\nBest subset merit: {:.4}\n\nSelected attributes:\n\n",
            self.evaluated, self.merit
        );
        for n in &self.names {
            s.push_str(&format!("- {n}\n"));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("attribute,merit,evaluated\n");
        for n in &self.names {
            s.push_str(&format!("{n},{:.6},{}\n", self.merit, self.evaluated));
        }
        s
    }
}

/// Best-first forward search over attribute subsets scored by CFS merit.
/// Stops after `max_stale` consecutive expansions without improvement.
pub fn cfs_best_first(data: &Dataset, max_stale: usize) -> Result<CfsResult> {
    let eval = CfsEvaluator::new(data)?;
    Ok(best_first(&eval, max_stale.max(1)))
}

pub fn best_first(eval: &CfsEvaluator, max_stale: usize) -> CfsResult {
    let n = eval.su_class.len();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    // (merit, insertion order, subset); popped by highest merit, then oldest
    let mut open: Vec<(f64, usize, Vec<usize>)> = vec![(0.0, 0, Vec::new())];
    let mut inserted = 1usize;
    let mut best: (f64, Vec<usize>) = (0.0, Vec::new());
    let mut evaluated = 0usize;
    let mut stale = 0usize;

    while stale < max_stale {
        let Some(pos) = (0..open.len()).max_by(|&a, &b| {
            open[a].0.total_cmp(&open[b].0).then(open[b].1.cmp(&open[a].1))
        }) else {
            break;
        };
        let (_, _, current) = open.swap_remove(pos);
        let children: Vec<Vec<usize>> = (0..n)
            .filter(|a| !current.contains(a))
            .map(|a| {
                let mut s = current.clone();
                s.push(a);
                s.sort_unstable();
                s
            })
            .filter(|s| visited.insert(s.clone()))
            .collect();
        let merits = par::map_slice(&children, |s| eval.merit(s));
        evaluated += children.len();
        let mut improved = false;
        for (s, m) in children.into_iter().zip(merits) {
            if m > best.0 + 1e-5 {
                best = (m, s.clone());
                improved = true;
            }
            open.push((m, inserted, s));
            inserted += 1;
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
        }
    }
    CfsResult {
        names: best.1.iter().map(|&a| eval.names[a].clone()).collect(),
        selected: best.1,
        merit: best.0,
        evaluated,
    }
}
