//! Gain-ratio decision trees (C4.5-style) and random trees.
//!
//! Trees are induced top-down on weighted instances. At each node the split
//! with the highest gain ratio is chosen, among all attributes for a plain
//! tree or among a fresh random attribute subset for a random tree. Numeric
//! attributes are split at the midpoint between adjacent distinct values that
//! maximizes information gain; nominal attributes branch once per category.
//! Plain trees are optionally pruned bottom-up with the pessimistic
//! upper-confidence error estimate.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{ClassLabel, Dataset, Schema};
use crate::error::{Error, Result};
use crate::info::{gain_and_split_info, gain_ratio_of_branches};
use crate::seeding;

const EPS: f64 = 1e-12;

/// How many attributes a node may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeSampling {
    /// Every attribute (plain decision tree).
    All,
    /// `floor(log2 N) + 1` attributes per node.
    Breiman,
    /// `ceil(log2 N + 1)` attributes per node.
    BreimanCeil,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_leaf_weight: f64,
    pub use_pruning: bool,
    pub confidence_factor: f64,
    pub attribute_sampling: AttributeSampling,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self::j48()
    }
}

impl TreeConfig {
    /// Pruned gain-ratio tree: min leaf weight 2, confidence 0.25.
    pub fn j48() -> Self {
        Self {
            min_leaf_weight: 2.0,
            use_pruning: true,
            confidence_factor: 0.25,
            attribute_sampling: AttributeSampling::All,
            seed: 0,
        }
    }

    /// Unpruned random tree with min leaf weight 1.
    pub fn random_tree(seed: u64) -> Self {
        Self {
            min_leaf_weight: 1.0,
            use_pruning: false,
            confidence_factor: 0.25,
            attribute_sampling: AttributeSampling::Breiman,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_random(&self) -> bool {
        self.attribute_sampling != AttributeSampling::All
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_leaf_weight > 0.0) {
            return Err(Error::invalid("min_leaf_weight must be > 0"));
        }
        if !(self.confidence_factor > 0.0 && self.confidence_factor < 1.0) {
            return Err(Error::invalid("confidence_factor must be in (0, 1)"));
        }
        if self.attribute_sampling == AttributeSampling::Fixed(0) {
            return Err(Error::invalid("attribute subset size must be >= 1"));
        }
        Ok(())
    }

    fn subspace_size(&self, n: usize) -> usize {
        match self.attribute_sampling {
            AttributeSampling::All => n,
            AttributeSampling::Breiman => default_subspace_size(n),
            AttributeSampling::BreimanCeil => ((n as f64).log2() + 1.0).ceil().clamp(1.0, n as f64) as usize,
            AttributeSampling::Fixed(m) => m.clamp(1, n.max(1)),
        }
    }
}

/// `floor(log2 n) + 1`, clamped to `[1, n]`.
pub fn default_subspace_size(n_features: usize) -> usize {
    if n_features <= 1 {
        return 1;
    }
    let floor_log2 = (usize::BITS - 1 - n_features.leading_zeros()) as usize;
    (floor_log2 + 1).min(n_features)
}

/// Class weights `[negative, positive]`.
pub type ClassDist = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    pub p_positive: f64,
}

impl Prediction {
    /// Normalizes `dist`; the label is positive only on a strict majority.
    pub fn from_dist(dist: &ClassDist) -> Self {
        let total = dist[0] + dist[1];
        let p_positive = if total > 0.0 { dist[1] / total } else { 0.5 };
        Self {
            label: if dist[1] > dist[0] {
                ClassLabel::Positive
            } else {
                ClassLabel::Negative
            },
            p_positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        dist: ClassDist,
    },
    Nominal {
        attribute: usize,
        children: Vec<TreeNode>,
        child_weights: Vec<f64>,
        dist: ClassDist,
    },
    Numeric {
        attribute: usize,
        threshold: f64,
        below: Box<TreeNode>,
        above: Box<TreeNode>,
        dist: ClassDist,
    },
}

impl TreeNode {
    pub fn dist(&self) -> &ClassDist {
        match self {
            TreeNode::Leaf { dist } | TreeNode::Nominal { dist, .. } | TreeNode::Numeric { dist, .. } => dist,
        }
    }

    fn children(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf { .. } => Vec::new(),
            TreeNode::Nominal { children, .. } => children.iter().collect(),
            TreeNode::Numeric { below, above, .. } => vec![below, above],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            _ => self.children().iter().map(|c| c.leaf_count()).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// The leaf reached by `values`. At a nominal split a category without
    /// training weight follows the heaviest child.
    pub fn leaf_for(&self, values: &[f64]) -> &ClassDist {
        let mut node = self;
        loop {
            node = match node {
                TreeNode::Leaf { dist } => return dist,
                TreeNode::Nominal {
                    attribute,
                    children,
                    child_weights,
                    ..
                } => {
                    let cat = values[*attribute] as usize;
                    if cat < children.len() && child_weights[cat] > 0.0 {
                        &children[cat]
                    } else {
                        &children[heaviest(child_weights)]
                    }
                }
                TreeNode::Numeric {
                    attribute,
                    threshold,
                    below,
                    above,
                    ..
                } => {
                    if values[*attribute] <= *threshold {
                        below
                    } else {
                        above
                    }
                }
            };
        }
    }

    pub fn predict(&self, values: &[f64]) -> Prediction {
        Prediction::from_dist(self.leaf_for(values))
    }

    /// Pessimistic upper-confidence error estimate of this subtree.
    pub fn estimated_errors(&self, confidence: f64) -> f64 {
        match self {
            TreeNode::Leaf { dist } => leaf_estimated_errors(dist, confidence),
            _ => self.children().iter().map(|c| c.estimated_errors(confidence)).sum(),
        }
    }
}

fn heaviest(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// Gain ratio of splitting `data` (with instance `weights`) on `attribute`;
/// `threshold` is required for numeric attributes. `None` means the split is
/// unusable (zero split information).
pub fn gain_ratio(data: &Dataset, weights: &[f64], attribute: usize, threshold: Option<f64>) -> Option<f64> {
    let attr = &data.schema.attributes[attribute];
    let n_branches = attr.arity().unwrap_or(2);
    let mut branches = vec![[0.0; 2]; n_branches];
    for (inst, &w) in data.instances.iter().zip(weights) {
        let v = inst.values[attribute];
        let b = match attr.arity() {
            Some(_) => v as usize,
            None => usize::from(v > threshold?),
        };
        branches[b][inst.label.index()] += w;
    }
    gain_ratio_of_branches(&branches)
}

#[derive(Debug, Clone)]
enum Split {
    Nominal { attribute: usize },
    Numeric { attribute: usize, threshold: f64 },
}

struct Builder<'a> {
    schema: &'a Schema,
    x: Vec<&'a [f64]>,
    y: Vec<usize>,
    w: Vec<f64>,
    cfg: TreeConfig,
    subspace: usize,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn dist(&self, idx: &[usize]) -> ClassDist {
        let mut d = [0.0; 2];
        for &i in idx {
            d[self.y[i]] += self.w[i];
        }
        d
    }

    fn build(&mut self, idx: Vec<usize>) -> TreeNode {
        let dist = self.dist(&idx);
        let total = dist[0] + dist[1];
        if dist[0] <= 0.0 || dist[1] <= 0.0 || total < 2.0 * self.cfg.min_leaf_weight {
            return TreeNode::Leaf { dist };
        }
        let Some(split) = self.choose_split(&idx) else {
            return TreeNode::Leaf { dist };
        };
        match split {
            Split::Nominal { attribute } => {
                let arity = self.schema.attributes[attribute].arity().unwrap_or(0);
                let mut parts = vec![Vec::new(); arity];
                for &i in &idx {
                    parts[self.x[i][attribute] as usize].push(i);
                }
                let child_weights: Vec<f64> = parts.iter().map(|p| p.iter().map(|&i| self.w[i]).sum()).collect();
                let children = parts
                    .into_iter()
                    .map(|p| {
                        if p.is_empty() {
                            TreeNode::Leaf { dist }
                        } else {
                            self.build(p)
                        }
                    })
                    .collect();
                TreeNode::Nominal {
                    attribute,
                    children,
                    child_weights,
                    dist,
                }
            }
            Split::Numeric { attribute, threshold } => {
                let (lo, hi): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| self.x[i][attribute] <= threshold);
                let below = Box::new(self.build(lo));
                let above = Box::new(self.build(hi));
                TreeNode::Numeric {
                    attribute,
                    threshold,
                    below,
                    above,
                    dist,
                }
            }
        }
    }

    fn choose_split(&mut self, idx: &[usize]) -> Option<Split> {
        let n_attr = self.schema.attributes.len();
        let mut order: Vec<usize> = (0..n_attr).collect();
        if self.cfg.is_random() {
            order.shuffle(&mut self.rng);
        }
        let mut best: Option<(f64, usize, Split)> = None;
        for (considered, &a) in order.iter().enumerate() {
            // random trees keep drawing attributes until a usable split turns up
            if considered >= self.subspace && best.is_some() {
                break;
            }
            if let Some((ratio, split)) = self.best_split_on(idx, a) {
                let better = match &best {
                    None => true,
                    Some((r, attr, _)) => ratio > r + EPS || ((ratio - r).abs() <= EPS && a < *attr),
                };
                if better {
                    best = Some((ratio, a, split));
                }
            }
        }
        best.map(|(_, _, s)| s)
    }

    fn best_split_on(&self, idx: &[usize], a: usize) -> Option<(f64, Split)> {
        let min_leaf = self.cfg.min_leaf_weight;
        match self.schema.attributes[a].arity() {
            Some(arity) => {
                let mut branches = vec![[0.0; 2]; arity];
                for &i in idx {
                    branches[self.x[i][a] as usize][self.y[i]] += self.w[i];
                }
                let big_enough = branches.iter().filter(|b| b[0] + b[1] >= min_leaf).count();
                if big_enough < 2 {
                    return None;
                }
                gain_ratio_of_branches(&branches).map(|r| (r, Split::Nominal { attribute: a }))
            }
            None => {
                let mut sorted: Vec<usize> = idx.to_vec();
                sorted.sort_by(|&i, &j| self.x[i][a].total_cmp(&self.x[j][a]));
                let total = self.dist(idx);
                let mut left = [0.0; 2];
                let mut best: Option<(f64, f64, [ClassDist; 2])> = None;
                for p in 0..sorted.len() - 1 {
                    let i = sorted[p];
                    left[self.y[i]] += self.w[i];
                    let (v, next) = (self.x[i][a], self.x[sorted[p + 1]][a]);
                    if v >= next {
                        continue;
                    }
                    let right = [total[0] - left[0], total[1] - left[1]];
                    if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
                        continue;
                    }
                    let (gain, _) = gain_and_split_info(&[left, right]);
                    if best.as_ref().is_none_or(|(g, _, _)| gain > g + EPS) {
                        let mut t = v + (next - v) / 2.0;
                        if t >= next {
                            t = v;
                        }
                        best = Some((gain, t, [left, right]));
                    }
                }
                let (_, threshold, branches) = best?;
                gain_ratio_of_branches(&branches).map(|r| (r, Split::Numeric { attribute: a, threshold }))
            }
        }
    }
}

/// Induces a tree on `data` with optional per-instance `weights` (default 1).
pub fn fit_tree(data: &Dataset, weights: Option<&[f64]>, cfg: &TreeConfig) -> Result<TreeNode> {
    cfg.validate()?;
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: w.len(),
            });
        }
    }
    let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let keep: Vec<usize> = (0..data.len()).filter(|&i| weight_of(i) > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let mut builder = Builder {
        schema: &data.schema,
        x: keep.iter().map(|&i| data.instances[i].values.as_slice()).collect(),
        y: keep.iter().map(|&i| data.instances[i].label.index()).collect(),
        w: keep.iter().map(|&i| weight_of(i)).collect(),
        cfg: *cfg,
        subspace: cfg.subspace_size(data.schema.n_attributes()),
        rng: seeding::rng(cfg.seed),
    };
    let root = builder.build((0..keep.len()).collect());
    Ok(if cfg.use_pruning && !cfg.is_random() {
        prune(root, cfg.confidence_factor)
    } else {
        root
    })
}

/// Upper-confidence bound on the number of errors at a leaf holding `n`
/// weight with `e` misclassified.
pub fn pessimistic_extra_errors(n: f64, e: f64, confidence: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - confidence.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (pessimistic_extra_errors(n, 1.0, confidence) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - e
}

fn leaf_estimated_errors(dist: &ClassDist, confidence: f64) -> f64 {
    let n = dist[0] + dist[1];
    let e = dist[0].min(dist[1]);
    e + pessimistic_extra_errors(n, e, confidence)
}

/// Replaces a subtree by a leaf whenever the leaf's pessimistic error
/// estimate does not exceed the subtree's (plus 0.1, as C4.5 does).
pub fn prune(node: TreeNode, confidence: f64) -> TreeNode {
    let node = match node {
        TreeNode::Leaf { .. } => return node,
        TreeNode::Nominal {
            attribute,
            children,
            child_weights,
            dist,
        } => TreeNode::Nominal {
            attribute,
            children: children
                .into_iter()
                .zip(&child_weights)
                .map(|(c, &w)| if w > 0.0 { prune(c, confidence) } else { c })
                .collect(),
            child_weights,
            dist,
        },
        TreeNode::Numeric {
            attribute,
            threshold,
            below,
            above,
            dist,
        } => TreeNode::Numeric {
            attribute,
            threshold,
            below: Box::new(prune(*below, confidence)),
            above: Box::new(prune(*above, confidence)),
            dist,
        },
    };
    let subtree = subtree_errors(&node, confidence);
    let as_leaf = leaf_estimated_errors(node.dist(), confidence);
    if as_leaf <= subtree + 0.1 {
        TreeNode::Leaf { dist: *node.dist() }
    } else {
        node
    }
}

/// Estimated errors of the subtree, ignoring empty nominal branches.
fn subtree_errors(node: &TreeNode, confidence: f64) -> f64 {
    match node {
        TreeNode::Leaf { dist } => leaf_estimated_errors(dist, confidence),
        TreeNode::Nominal {
            children, child_weights, ..
        } => children
            .iter()
            .zip(child_weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(c, _)| subtree_errors(c, confidence))
            .sum(),
        TreeNode::Numeric { below, above, .. } => subtree_errors(below, confidence) + subtree_errors(above, confidence),
    }
}

/// One `IF ... THEN class = label` line per leaf, conditions in
/// root-to-leaf order.
pub fn export_rules(tree: &TreeNode, schema: &Schema) -> Vec<String> {
    fn walk(node: &TreeNode, schema: &Schema, conds: &mut Vec<String>, out: &mut Vec<String>) {
        match node {
            TreeNode::Leaf { dist } => {
                let label = Prediction::from_dist(dist).label;
                let cond = if conds.is_empty() {
                    "TRUE".to_string()
                } else {
                    conds.join(" AND ")
                };
                out.push(format!(
                    "IF {cond} THEN {} = {} ({}/{})",
                    schema.class,
                    schema.label_name(label),
                    fmt_weight(dist[0] + dist[1]),
                    fmt_weight(dist[0].min(dist[1])),
                ));
            }
            TreeNode::Nominal {
                attribute, children, ..
            } => {
                let attr = &schema.attributes[*attribute];
                for (c, child) in children.iter().enumerate() {
                    conds.push(format!("{} = {}", attr.name, attr.categories()[c]));
                    walk(child, schema, conds, out);
                    conds.pop();
                }
            }
            TreeNode::Numeric {
                attribute,
                threshold,
                below,
                above,
                ..
            } => {
                let name = &schema.attributes[*attribute].name;
                conds.push(format!("{name} <= {threshold}"));
                walk(below, schema, conds, out);
                conds.pop();
                conds.push(format!("{name} > {threshold}"));
                walk(above, schema, conds, out);
                conds.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, schema, &mut Vec::new(), &mut out);
    out
}

fn fmt_weight(w: f64) -> String {
    if w.fract() == 0.0 {
        format!("{w:.1}")
    } else {
        format!("{w:.2}")
    }
}
