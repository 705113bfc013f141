//! Tree ensembles: bagging, AdaBoost.M1, random forest and random committee.
//!
//! Base learners are themselves [`ClassifierSpec`]s, so meta-learners nest
//! (bagging of random forests, AdaBoost of random trees, ...). Members of
//! bagging, random forests and committees are fitted independently from
//! pre-derived seeds and may run in parallel; boosting rounds are sequential.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset, Schema};
use crate::error::{Error, Result};
use crate::trees::{export_rules, fit_tree, AttributeSampling, Prediction, TreeConfig, TreeNode};
use crate::{par, seeding};

/// Member weight used when a boosting round makes no training error.
pub const PERFECT_MEMBER_WEIGHT: f64 = 23.025_850_929_940_457; // ln(1e10)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    Bagging,
    AdaBoost,
    RandomForest,
    RandomCommittee,
}

impl EnsembleMethod {
    pub fn default_members(self) -> usize {
        match self {
            EnsembleMethod::RandomForest => 100,
            _ => 10,
        }
    }
}

/// What to train. Seeds are supplied at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Tree {
        tree: TreeConfig,
    },
    Bagging {
        n_members: usize,
        base: Box<ClassifierSpec>,
    },
    #[serde(rename = "adaboost")]
    AdaBoost {
        n_members: usize,
        base: Box<ClassifierSpec>,
    },
    RandomForest {
        n_members: usize,
        tree: TreeConfig,
    },
    RandomCommittee {
        n_members: usize,
        base: Box<ClassifierSpec>,
    },
}

impl ClassifierSpec {
    pub fn j48() -> Self {
        ClassifierSpec::Tree { tree: TreeConfig::j48() }
    }

    pub fn random_tree() -> Self {
        ClassifierSpec::Tree {
            tree: TreeConfig::random_tree(0),
        }
    }

    pub fn random_forest(n_members: usize) -> Self {
        ClassifierSpec::RandomForest {
            n_members,
            tree: TreeConfig::random_tree(0),
        }
    }

    pub fn bagging(n_members: usize, base: ClassifierSpec) -> Self {
        ClassifierSpec::Bagging {
            n_members,
            base: Box::new(base),
        }
    }

    pub fn adaboost(n_members: usize, base: ClassifierSpec) -> Self {
        ClassifierSpec::AdaBoost {
            n_members,
            base: Box::new(base),
        }
    }

    pub fn random_committee(n_members: usize, base: ClassifierSpec) -> Self {
        ClassifierSpec::RandomCommittee {
            n_members,
            base: Box::new(base),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Tree { tree } => tree.validate(),
            ClassifierSpec::RandomForest { n_members, tree } => {
                check_members(*n_members)?;
                tree.validate()
            }
            ClassifierSpec::Bagging { n_members, base }
            | ClassifierSpec::AdaBoost { n_members, base }
            | ClassifierSpec::RandomCommittee { n_members, base } => {
                check_members(*n_members)?;
                base.validate()
            }
        }
    }

    /// Fits on `data` with optional instance weights.
    pub fn fit(&self, data: &Dataset, weights: Option<&[f64]>, seed: u64) -> Result<TrainedModel> {
        if data.is_empty() {
            return Err(Error::EmptyTraining);
        }
        Ok(match self {
            ClassifierSpec::Tree { tree } => TrainedModel::Tree(fit_tree(data, weights, &tree.with_seed(seed))?),
            ClassifierSpec::Bagging { n_members, base } => {
                TrainedModel::Ensemble(fit_bagging(data, weights, *n_members, base, seed)?)
            }
            ClassifierSpec::RandomForest { n_members, tree } => {
                TrainedModel::Ensemble(fit_random_forest(data, weights, *n_members, tree, seed)?)
            }
            ClassifierSpec::AdaBoost { n_members, base } => {
                TrainedModel::Ensemble(fit_adaboost(data, weights, *n_members, base, seed)?)
            }
            ClassifierSpec::RandomCommittee { n_members, base } => {
                TrainedModel::Ensemble(fit_random_committee(data, weights, *n_members, base, seed)?)
            }
        })
    }
}

fn check_members(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("ensembles need at least one member"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Tree(TreeNode),
    Ensemble(EnsembleModel),
}

impl TrainedModel {
    pub fn predict(&self, values: &[f64]) -> Prediction {
        match self {
            TrainedModel::Tree(t) => t.predict(values),
            TrainedModel::Ensemble(e) => e.predict(values),
        }
    }

    /// Every tree in the model with a path-like name (`member 3 / member 0`).
    pub fn trees(&self) -> Vec<(String, &TreeNode)> {
        fn walk<'a>(m: &'a TrainedModel, prefix: String, out: &mut Vec<(String, &'a TreeNode)>) {
            match m {
                TrainedModel::Tree(t) => out.push((prefix, t)),
                TrainedModel::Ensemble(e) => {
                    for (i, (member, _)) in e.members.iter().enumerate() {
                        let name = if prefix.is_empty() {
                            format!("member {i}")
                        } else {
                            format!("{prefix} / member {i}")
                        };
                        walk(member, name, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(self, String::new(), &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OobEstimate {
    /// Misclassification rate over instances with at least one OOB vote.
    pub error: f64,
    /// Fraction of instances with at least one OOB vote.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub method: EnsembleMethod,
    /// `(member, weight)`; weights are 1 except for boosting.
    pub members: Vec<(TrainedModel, f64)>,
    pub oob: Option<OobEstimate>,
}

impl EnsembleModel {
    pub fn predict(&self, values: &[f64]) -> Prediction {
        match self.method {
            EnsembleMethod::RandomCommittee => {
                let mean = self.members.iter().map(|(m, _)| m.predict(values).p_positive).sum::<f64>()
                    / self.members.len() as f64;
                Prediction {
                    label: if mean > 0.5 {
                        ClassLabel::Positive
                    } else {
                        ClassLabel::Negative
                    },
                    p_positive: mean,
                }
            }
            _ => {
                let mut dist = [0.0; 2];
                for (m, w) in &self.members {
                    dist[m.predict(values).label.index()] += w;
                }
                Prediction::from_dist(&dist)
            }
        }
    }
}

/// Class with the largest total weight; ties go to the negative class.
pub fn majority_vote(votes: &[ClassLabel], weights: &[f64]) -> Result<ClassLabel> {
    if votes.is_empty() {
        return Err(Error::invalid("empty vote list"));
    }
    if votes.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: votes.len(),
            right: weights.len(),
        });
    }
    let mut dist = [0.0; 2];
    for (v, w) in votes.iter().zip(weights) {
        dist[v.index()] += w;
    }
    Ok(Prediction::from_dist(&dist).label)
}

/// Probability that a majority of `l` independent voters, each right with
/// probability `p`, is right: `sum_{m > l/2} C(l, m) p^m (1-p)^(l-m)`.
pub fn theoretical_ensemble_accuracy(l: usize, p: f64) -> Result<f64> {
    if l == 0 || l.is_multiple_of(2) {
        return Err(Error::invalid(format!("ensemble size must be odd, got {l}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    let mut coeff = 1.0f64; // C(l, m)
    let mut total = 0.0;
    for m in 0..=l {
        if m > 0 {
            coeff = coeff * (l - m + 1) as f64 / m as f64;
        }
        if m > l / 2 {
            total += coeff * p.powi(m as i32) * (1.0 - p).powi((l - m) as i32);
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Bootstrap multiplicities: `n` draws with replacement, with probability
/// proportional to `weights` when given.
pub fn bootstrap_counts<R: Rng>(n: usize, weights: Option<&[f64]>, rng: &mut R) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    match weights {
        None => {
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
        }
        Some(w) => {
            let mut cumulative = Vec::with_capacity(n);
            let mut acc = 0.0;
            for &x in w {
                acc += x.max(0.0);
                cumulative.push(acc);
            }
            for _ in 0..n {
                let r = rng.random::<f64>() * acc;
                let i = cumulative.partition_point(|&c| c <= r).min(n - 1);
                counts[i] += 1;
            }
        }
    }
    counts
}

fn member_seeds(seed: u64, i: usize) -> (u64, u64) {
    (seeding::derive(seed, 2 * i as u64), seeding::derive(seed, 2 * i as u64 + 1))
}

fn fit_bootstrapped(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    base: &ClassifierSpec,
    seed: u64,
    method: EnsembleMethod,
) -> Result<EnsembleModel> {
    check_members(n_members)?;
    if data.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let fitted = par::map_range(n_members, |i| -> Result<(TrainedModel, Vec<u32>)> {
        let (sample_seed, fit_seed) = member_seeds(seed, i);
        let counts = bootstrap_counts(data.len(), weights, &mut seeding::rng(sample_seed));
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Ok((base.fit(data, Some(&w), fit_seed)?, counts))
    });
    let fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let oob = out_of_bag(data, &fitted);
    Ok(EnsembleModel {
        method,
        members: fitted.into_iter().map(|(m, _)| (m, 1.0)).collect(),
        oob: Some(oob),
    })
}

fn out_of_bag(data: &Dataset, fitted: &[(TrainedModel, Vec<u32>)]) -> OobEstimate {
    let per_instance = par::map_range(data.len(), |i| {
        let mut dist = [0.0; 2];
        let mut any = false;
        for (m, counts) in fitted {
            if counts[i] == 0 {
                any = true;
                dist[m.predict(&data.instances[i].values).label.index()] += 1.0;
            }
        }
        any.then(|| Prediction::from_dist(&dist).label != data.instances[i].label)
    });
    let covered = per_instance.iter().flatten().count();
    let wrong = per_instance.iter().flatten().filter(|&&w| w).count();
    OobEstimate {
        error: if covered > 0 { wrong as f64 / covered as f64 } else { 0.0 },
        coverage: covered as f64 / data.len().max(1) as f64,
    }
}

/// Bagging: one base model per bootstrap replicate, combined by majority vote.
pub fn fit_bagging(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    base: &ClassifierSpec,
    seed: u64,
) -> Result<EnsembleModel> {
    fit_bootstrapped(data, weights, n_members, base, seed, EnsembleMethod::Bagging)
}

/// Random forest: bagging of unpruned random trees.
pub fn fit_random_forest(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    tree: &TreeConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    let mut tree = *tree;
    tree.use_pruning = false;
    if tree.attribute_sampling == AttributeSampling::All {
        tree.attribute_sampling = AttributeSampling::Breiman;
    }
    fit_bootstrapped(
        data,
        weights,
        n_members,
        &ClassifierSpec::Tree { tree },
        seed,
        EnsembleMethod::RandomForest,
    )
}

/// Random committee: members fitted on the full training set with
/// different seeds; prediction averages their probability estimates.
pub fn fit_random_committee(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    base: &ClassifierSpec,
    seed: u64,
) -> Result<EnsembleModel> {
    check_members(n_members)?;
    let members = par::map_range(n_members, |i| base.fit(data, weights, member_seeds(seed, i).1))
        .into_iter()
        .map(|m| m.map(|m| (m, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        method: EnsembleMethod::RandomCommittee,
        members,
        oob: None,
    })
}

/// State of one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    /// Normalized instance weights the round was trained on.
    pub weights: Vec<f64>,
    pub error: f64,
    /// `None` when the round stopped boosting (error 0 or >= 0.5).
    pub beta: Option<f64>,
    pub member_weight: Option<f64>,
}

/// AdaBoost.M1 with instance reweighting.
pub fn fit_adaboost(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    base: &ClassifierSpec,
    seed: u64,
) -> Result<EnsembleModel> {
    fit_adaboost_traced(data, weights, n_members, base, seed).map(|(m, _)| m)
}

/// [`fit_adaboost`] that also returns the per-round trace.
///
/// Each round fits the base learner on the current weights (rescaled to sum
/// to `n`), computes the weighted error `e`, and stops when `e >= 0.5` or
/// `e == 0`. Otherwise `beta = e / (1 - e)`, the member weight is
/// `ln(1 / beta)`, correctly classified instances are multiplied by `beta`
/// and the weights renormalized. A zero-error member gets weight `ln(1e10)`.
pub fn fit_adaboost_traced(
    data: &Dataset,
    weights: Option<&[f64]>,
    n_members: usize,
    base: &ClassifierSpec,
    seed: u64,
) -> Result<(EnsembleModel, Vec<BoostRound>)> {
    check_members(n_members)?;
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyTraining);
    }
    let mut w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    normalize(&mut w)?;

    let mut members = Vec::new();
    let mut trace = Vec::new();
    for round in 0..n_members {
        let scaled: Vec<f64> = w.iter().map(|x| x * n as f64).collect();
        let model = base.fit(data, Some(&scaled), seeding::derive(seed, round as u64))?;
        let wrong: Vec<bool> = par::map_slice(&data.instances, |inst| model.predict(&inst.values).label != inst.label);
        let error: f64 = w.iter().zip(&wrong).filter(|(_, &m)| m).map(|(x, _)| x).sum();
        let mut record = BoostRound {
            weights: w.clone(),
            error,
            beta: None,
            member_weight: None,
        };
        if error >= 0.5 {
            if members.is_empty() {
                members.push((model, 1.0));
                record.member_weight = Some(1.0);
            }
            trace.push(record);
            break;
        }
        if error <= 0.0 {
            members.push((model, PERFECT_MEMBER_WEIGHT));
            record.member_weight = Some(PERFECT_MEMBER_WEIGHT);
            trace.push(record);
            break;
        }
        let beta = error / (1.0 - error);
        let member_weight = (1.0 / beta).ln();
        members.push((model, member_weight));
        record.beta = Some(beta);
        record.member_weight = Some(member_weight);
        trace.push(record);
        for (x, &m) in w.iter_mut().zip(&wrong) {
            if !m {
                *x *= beta;
            }
        }
        normalize(&mut w)?;
    }
    Ok((
        EnsembleModel {
            method: EnsembleMethod::AdaBoost,
            members,
            oob: None,
        },
        trace,
    ))
}

fn normalize(w: &mut [f64]) -> Result<()> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("instance weights must be nonnegative with a positive sum"));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(())
}

/// A fitted model together with the schema it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: Schema,
    pub spec: ClassifierSpec,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Rules of every tree, with a header line per ensemble member.
    pub fn rules(&self) -> Vec<String> {
        let trees = self.model.trees();
        let single = trees.len() == 1 && matches!(self.model, TrainedModel::Tree(_));
        let mut out = Vec::new();
        for (name, tree) in trees {
            if !single {
                out.push(format!("# {name}"));
            }
            out.extend(export_rules(tree, &self.schema));
        }
        out
    }
}
