//! Random undersampling, SMOTE, and clustering-based random undersampling.
//!
//! Clustering-RUS partitions the training data with k-means (class attribute
//! excluded), computes the imbalance ratio of every cluster, and undersamples
//! only the clusters whose ratio exceeds a threshold. Clusters are split into a
//! low-IR group and a high-IR group; one classifier is trained per group and
//! test instances are routed through the nearest centroid.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset, Instance, Origin};
use crate::distance_clustering::{kmeans_fit, ClusterModel, FeatureScaler, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RusConfig {
    /// Largest majority:minority ratio kept after undersampling.
    pub distribution_spread: f64,
    pub seed: u64,
}

impl RusConfig {
    pub fn new(distribution_spread: f64, seed: u64) -> Self {
        Self {
            distribution_spread,
            seed,
        }
    }
}

/// Randomly drops majority instances until `majority <= spread * minority`.
///
/// The retained majority count is `floor(spread * minority)`; minority
/// instances and the relative order of kept instances are preserved.
pub fn rus_undersample(data: &Dataset, cfg: &RusConfig) -> Result<Dataset> {
    let keep = rus_keep_indices(data, cfg)?;
    if keep.len() == data.len() {
        return Ok(data.clone());
    }
    Ok(data.subset(&keep))
}

/// Ascending indices of the instances [`rus_undersample`] keeps.
pub fn rus_keep_indices(data: &Dataset, cfg: &RusConfig) -> Result<Vec<usize>> {
    if !(cfg.distribution_spread > 0.0) {
        return Err(Error::invalid("distribution spread must be > 0"));
    }
    let (neg, pos) = data.class_counts();
    if pos == 0 {
        return Err(Error::NoMinority);
    }
    let target = (cfg.distribution_spread * pos as f64).floor() as usize;
    if neg <= target {
        return Ok((0..data.len()).collect());
    }
    let majority: Vec<usize> = (0..data.len())
        .filter(|&i| !data.instances[i].label.is_positive())
        .collect();
    let mut rng = seeding::rng(cfg.seed);
    let mut keep = vec![false; data.len()];
    for &i in majority.choose_multiple(&mut rng, target) {
        keep[i] = true;
    }
    Ok((0..data.len())
        .filter(|&i| data.instances[i].label.is_positive() || keep[i])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    /// 100 adds one synthetic per minority instance, 500 adds five.
    pub percentage: u32,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl SmoteConfig {
    pub fn new(percentage: u32, seed: u64) -> Self {
        Self {
            percentage,
            k_neighbors: 5,
            seed,
        }
    }
}

/// Index (into `minority`) of the k nearest other minority instances of each
/// minority instance, nearest first, ties by index.
fn minority_neighbors(minority: &[&Instance], scaler: &FeatureScaler, k: usize) -> Result<Vec<Vec<usize>>> {
    let normalized: Vec<Vec<f64>> = minority
        .iter()
        .map(|x| scaler.normalize(&x.values))
        .collect::<Result<_>>()?;
    let numeric: Vec<bool> = scaler.ranges.iter().map(Option::is_some).collect();
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&numeric)
            .map(|((x, y), &num)| if num { (x - y) * (x - y) } else if x == y { 0.0 } else { 1.0 })
            .sum()
    };
    Ok(crate::par::map_range(minority.len(), |i| {
        let mut d: Vec<(f64, usize)> = (0..minority.len())
            .filter(|&j| j != i)
            .map(|j| (sq(&normalized[i], &normalized[j]), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(k).map(|(_, j)| j).collect()
    }))
}

/// Adds `floor(percentage / 100 * |minority|)` synthetic minority instances.
///
/// Each synthetic instance interpolates every numeric attribute between a
/// base minority instance and one of its k nearest minority neighbors with a
/// single `delta ~ U[0, 1]`; nominal attributes are copied from the base.
/// Originals come first in the output, synthetics after.
pub fn smote_oversample(data: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    if cfg.k_neighbors == 0 {
        return Err(Error::invalid("SMOTE needs k_neighbors >= 1"));
    }
    let minority: Vec<&Instance> = data.instances.iter().filter(|i| i.label.is_positive()).collect();
    if minority.len() <= cfg.k_neighbors {
        return Err(Error::invalid(format!(
            "SMOTE with k = {} needs more than {} minority instances, found {}",
            cfg.k_neighbors,
            cfg.k_neighbors,
            minority.len()
        )));
    }
    let total = (cfg.percentage as usize * minority.len()) / 100;
    let mut rng = seeding::rng(cfg.seed);

    // bases: every minority instance `whole` times, the remainder by shuffle
    let whole = cfg.percentage as usize / 100;
    let mut bases: Vec<usize> = (0..whole).flat_map(|_| 0..minority.len()).collect();
    let mut rest: Vec<usize> = (0..minority.len()).collect();
    rest.shuffle(&mut rng);
    bases.extend(rest.into_iter().take(total - bases.len()));

    let scaler = FeatureScaler::fit(data);
    let neighbors = minority_neighbors(&minority, &scaler, cfg.k_neighbors)?;

    let mut out = data.instances.clone();
    out.reserve(total);
    for &b in &bases {
        let base = minority[b];
        let nb = minority[neighbors[b][rng.random_range(0..neighbors[b].len())]];
        let delta: f64 = rng.random();
        out.push(interpolate(data, base, nb, delta));
    }
    Ok(data.with_instances(out))
}

/// `base + delta * (neighbor - base)` on numeric attributes, base values on
/// nominal ones.
pub fn interpolate(data: &Dataset, base: &Instance, neighbor: &Instance, delta: f64) -> Instance {
    let values = data
        .schema
        .attributes
        .iter()
        .enumerate()
        .map(|(a, attr)| {
            if attr.is_numeric() {
                base.values[a] + delta * (neighbor.values[a] - base.values[a])
            } else {
                base.values[a]
            }
        })
        .collect();
    Instance {
        values,
        label: ClassLabel::Positive,
        origin: Origin::Synthetic { base: base.row() },
    }
}

/// `global_ir * (1 - reduction_fraction)`.
pub fn suggest_threshold(global_ir: f64, reduction_fraction: f64) -> Result<f64> {
    if !(global_ir > 0.0) {
        return Err(Error::invalid("global imbalance ratio must be > 0"));
    }
    if !(0.0..=1.0).contains(&reduction_fraction) {
        return Err(Error::invalid(format!(
            "reduction fraction {reduction_fraction} outside [0, 1]"
        )));
    }
    Ok(global_ir * (1.0 - reduction_fraction))
}

/// Which clusters get undersampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UndersamplePolicy {
    /// Undersample clusters whose IR exceeds the threshold.
    #[default]
    Exceed,
    /// Undersample clusters at or below the threshold instead.
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrGroup {
    LowIr,
    HighIr,
}

impl IrGroup {
    pub fn name(self) -> &'static str {
        match self {
            IrGroup::LowIr => "low_ir",
            IrGroup::HighIr => "high_ir",
        }
    }

    pub fn other(self) -> Self {
        match self {
            IrGroup::LowIr => IrGroup::HighIr,
            IrGroup::HighIr => IrGroup::LowIr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInfo {
    /// Indices into the training set.
    pub members: Vec<usize>,
    pub n_negative: usize,
    pub n_positive: usize,
    /// `+inf` when the cluster has no minority instances.
    pub imbalance_ratio: f64,
    pub undersample: bool,
    pub group: IrGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    pub cluster_model: ClusterModel,
    pub clusters: Vec<ClusterInfo>,
    pub threshold: f64,
    pub policy: UndersamplePolicy,
    pub warnings: Vec<String>,
}

impl ClusterPartition {
    pub fn group_of_cluster(&self, cluster: usize) -> IrGroup {
        self.clusters[cluster].group
    }

    pub fn route(&self, x: &Instance) -> Result<IrGroup> {
        Ok(self.group_of_cluster(self.cluster_model.assign(x)?))
    }

    pub fn flagged(&self) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&c| self.clusters[c].undersample)
            .collect()
    }
}

/// Groups clusters by imbalance ratio and flags the ones to undersample.
///
/// Clusters with IR above `threshold` form the high-IR group; the rest form
/// the low-IR group. Under [`UndersamplePolicy::Exceed`] the high-IR group is
/// flagged. Fails with [`Error::IncreaseClusterCount`] when no cluster falls at
/// or below the threshold.
pub fn partition_from_model(
    train: &Dataset,
    model: ClusterModel,
    threshold: f64,
    policy: UndersamplePolicy,
) -> Result<ClusterPartition> {
    let mut warnings = Vec::new();
    let mut members = vec![Vec::new(); model.k];
    for (i, &c) in model.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let clusters: Vec<ClusterInfo> = members
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            let n_positive = members.iter().filter(|&&i| train.instances[i].label.is_positive()).count();
            let n_negative = members.len() - n_positive;
            let imbalance_ratio = if n_positive == 0 {
                warnings.push(format!(
                    "cluster {c} has no minority instances ({n_negative} majority); routed to the high-IR group"
                ));
                f64::INFINITY
            } else {
                n_negative as f64 / n_positive as f64
            };
            let group = if imbalance_ratio > threshold {
                IrGroup::HighIr
            } else {
                IrGroup::LowIr
            };
            let undersample = match policy {
                UndersamplePolicy::Exceed => group == IrGroup::HighIr,
                UndersamplePolicy::Invert => group == IrGroup::LowIr,
            };
            ClusterInfo {
                members,
                n_negative,
                n_positive,
                imbalance_ratio,
                undersample,
                group,
            }
        })
        .collect();
    if clusters.iter().all(|c| c.group == IrGroup::HighIr) {
        return Err(Error::IncreaseClusterCount { k: model.k, threshold });
    }
    Ok(ClusterPartition {
        cluster_model: model,
        clusters,
        threshold,
        policy,
        warnings,
    })
}

/// Fits k-means on `train` (class excluded) and builds the cluster partition.
pub fn plan_cluster_partition(
    train: &Dataset,
    k: usize,
    threshold: f64,
    seed: u64,
    policy: UndersamplePolicy,
) -> Result<ClusterPartition> {
    if k < 2 {
        return Err(Error::invalid("clustering-RUS needs at least 2 clusters"));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("imbalance threshold must be > 0"));
    }
    let model = kmeans_fit(train, k, seed, DEFAULT_MAX_ITER)?;
    partition_from_model(train, model, threshold, policy)
}

/// Starts at two clusters and increases k until at least one cluster falls
/// at or below the threshold.
pub fn plan_with_cluster_search(
    train: &Dataset,
    threshold: f64,
    seed: u64,
    policy: UndersamplePolicy,
    max_k: usize,
) -> Result<ClusterPartition> {
    let mut last = Error::invalid("max_k must be >= 2");
    for k in 2..=max_k.min(train.len()) {
        match plan_cluster_partition(train, k, threshold, seed, policy) {
            Err(e @ Error::IncreaseClusterCount { .. }) => last = e,
            other => return other,
        }
    }
    Err(last)
}

/// Training material of the two cluster groups.
#[derive(Debug, Clone)]
pub struct GroupTraining {
    pub low: Dataset,
    pub high: Dataset,
    pub warnings: Vec<String>,
}

impl GroupTraining {
    pub fn group(&self, g: IrGroup) -> &Dataset {
        match g {
            IrGroup::LowIr => &self.low,
            IrGroup::HighIr => &self.high,
        }
    }
}

/// Splits `train` into the two groups and undersamples the flagged clusters
/// of each group (as one pool) at `cfg.distribution_spread`.
pub fn apply_clustering_rus(train: &Dataset, part: &ClusterPartition, cfg: &RusConfig) -> Result<GroupTraining> {
    if part.cluster_model.assignments.len() != train.len() {
        return Err(Error::invalid("partition was built on a different training set"));
    }
    let mut warnings = Vec::new();
    let mut build = |group: IrGroup, salt: u64| -> Result<Dataset> {
        let mut kept = Vec::new();
        let mut flagged = Vec::new();
        for c in part.clusters.iter().filter(|c| c.group == group) {
            let target = if c.undersample { &mut flagged } else { &mut kept };
            target.extend(c.members.iter().copied());
        }
        if !flagged.is_empty() {
            flagged.sort_unstable();
            let pool = train.subset(&flagged);
            if pool.n_positive() == 0 {
                warnings.push(format!(
                    "{} group: flagged clusters have no minority instances; left untouched",
                    group.name()
                ));
                kept.extend(flagged);
            } else {
                let rus = RusConfig::new(cfg.distribution_spread, seeding::derive(cfg.seed, salt));
                kept.extend(rus_keep_indices(&pool, &rus)?.into_iter().map(|i| flagged[i]));
            }
        }
        kept.sort_unstable();
        let out: Vec<Instance> = kept.iter().map(|&i| train.instances[i].clone()).collect();
        if out.is_empty() {
            warnings.push(format!("{} group has no training instances", group.name()));
        }
        Ok(train.with_instances(out))
    };
    let low = build(IrGroup::LowIr, 0)?;
    let high = build(IrGroup::HighIr, 1)?;
    Ok(GroupTraining { low, high, warnings })
}
