//! Leakage-safe stratified cross-validation and a synthetic data generator.
//!
//! Folds are drawn on the original dataset before any resampling; samplers
//! only ever see the training portion of a fold. Every random choice is seeded
//! from the master seed through [`seeding`], so a run is a pure function of
//! the dataset, the spec and the seed, whether folds run in parallel or not.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSpec, ClassLabel, Dataset, Instance, Schema};
use crate::ensembles::{ClassifierSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::resampling::{
    apply_clustering_rus, plan_cluster_partition, rus_undersample, ClusterPartition, smote_oversample,
    suggest_threshold, IrGroup, RusConfig, SmoteConfig, UndersamplePolicy,
};
use crate::seeding::{self, stream};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ThresholdSpec {
    Fixed(f64),
    /// Fraction by which the training fold's global IR is reduced.
    Reduction(f64),
}

impl ThresholdSpec {
    pub fn resolve(self, train: &Dataset) -> Result<f64> {
        match self {
            ThresholdSpec::Fixed(t) => Ok(t),
            ThresholdSpec::Reduction(f) => suggest_threshold(train.imbalance_ratio()?, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SamplerSpec {
    None,
    Rus {
        spread: f64,
    },
    Smote {
        percentage: u32,
        k_neighbors: usize,
    },
    ClusteringRus {
        cluster_k: usize,
        /// When set, k grows from `cluster_k` up to this value until some
        /// cluster falls at or below the threshold.
        max_cluster_k: Option<usize>,
        threshold: ThresholdSpec,
        spread: f64,
        policy: UndersamplePolicy,
    },
}

impl SamplerSpec {
    pub fn clustering_rus(cluster_k: usize, threshold: f64, spread: f64) -> Self {
        SamplerSpec::ClusteringRus {
            cluster_k,
            max_cluster_k: None,
            threshold: ThresholdSpec::Fixed(threshold),
            spread,
            policy: UndersamplePolicy::Exceed,
        }
    }

    pub fn is_clustered(&self) -> bool {
        matches!(self, SamplerSpec::ClusteringRus { .. })
    }

    /// Resamples a training fold. Clustering-RUS is handled by
    /// [`run_cv_clustered`] and is rejected here.
    pub fn resample(&self, train: &Dataset, seed: u64) -> Result<Dataset> {
        match *self {
            SamplerSpec::None => Ok(train.clone()),
            SamplerSpec::Rus { spread } => rus_undersample(train, &RusConfig::new(spread, seed)),
            SamplerSpec::Smote {
                percentage,
                k_neighbors,
            } => smote_oversample(
                train,
                &SmoteConfig {
                    percentage,
                    k_neighbors,
                    seed,
                },
            ),
            SamplerSpec::ClusteringRus { .. } => {
                Err(Error::invalid("clustering-RUS trains one model per group; use run_cv_clustered"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub sampler: SamplerSpec,
    pub classifier: ClassifierSpec,
    pub k_folds: usize,
    pub seed: u64,
    /// F-measure beta.
    pub beta: f64,
}

impl ExperimentSpec {
    pub fn new(sampler: SamplerSpec, classifier: ClassifierSpec, seed: u64) -> Self {
        Self {
            sampler,
            classifier,
            k_folds: 10,
            seed,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::invalid("k_folds must be >= 2"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be > 0"));
        }
        self.classifier.validate()
    }
}

/// Prediction for one test instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Index in the evaluated dataset.
    pub index: usize,
    pub synthetic: bool,
    pub truth: ClassLabel,
    pub predicted: ClassLabel,
    /// Score of the positive class.
    pub score: f64,
    /// Group that scored the instance (clustering-RUS only).
    pub group: Option<IrGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: IrGroup,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: MetricsReport,
    pub records: Vec<Record>,
    pub groups: Vec<GroupResult>,
    /// Dataset indices of the original (non-synthetic) training instances the
    /// model saw, ascending.
    pub train_indices: Vec<usize>,
    pub train_synthetic: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// Metrics over the pooled records of every fold.
    pub pooled: MetricsReport,
    /// Unweighted mean of the per-fold metrics.
    pub fold_mean: MetricsReport,
    /// Clustering-RUS only: per-group metrics of the pooled records, averaged
    /// with the group test counts as weights.
    pub group_weighted: Option<MetricsReport>,
    pub warnings: Vec<String>,
}

impl CvResult {
    /// Group-weighted metrics for clustering-RUS, pooled metrics otherwise.
    pub fn headline(&self) -> &MetricsReport {
        self.group_weighted.as_ref().unwrap_or(&self.pooled)
    }

    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.folds.iter().flat_map(|f| f.records.iter())
    }

    pub fn group_pooled(&self, group: IrGroup, beta: f64) -> Result<Option<MetricsReport>> {
        let recs: Vec<&Record> = self.records().filter(|r| r.group == Some(group)).collect();
        if recs.is_empty() {
            return Ok(None);
        }
        report(recs.into_iter(), beta).map(Some)
    }
}

fn report<'a>(records: impl Iterator<Item = &'a Record>, beta: f64) -> Result<MetricsReport> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    let mut scores = Vec::new();
    for r in records {
        truth.push(r.truth);
        predicted.push(r.predicted);
        scores.push(r.score);
    }
    MetricsReport::from_predictions(&truth, &predicted, &scores, beta)
}

fn predict_into(model: &TrainedModel, data: &Dataset, index: usize, group: Option<IrGroup>) -> Record {
    let x = &data.instances[index];
    let p = model.predict(&x.values);
    Record {
        index,
        synthetic: x.is_synthetic(),
        truth: x.label,
        predicted: p.label,
        score: p.p_positive,
        group,
    }
}

fn original_indices(train: &Dataset) -> (Vec<usize>, usize) {
    let mut originals = Vec::new();
    let mut synthetic = 0;
    for x in &train.instances {
        if x.is_synthetic() {
            synthetic += 1;
        } else {
            originals.push(x.row());
        }
    }
    originals.sort_unstable();
    (originals, synthetic)
}

/// Stratified k-fold cross-validation.
///
/// Dispatches to [`run_cv_clustered`] for clustering-RUS.
pub fn run_cv(data: &Dataset, spec: &ExperimentSpec) -> Result<CvResult> {
    spec.validate()?;
    if spec.sampler.is_clustered() {
        return run_cv_clustered(data, spec);
    }
    let split = data.stratified_kfold(spec.k_folds, seeding::derive(spec.seed, stream::FOLDS))?;
    let folds = par::map_range(spec.k_folds, |f| -> Result<FoldResult> {
        let train_idx = split.train_indices(f);
        let test_idx = split.test_indices(f);
        let train = indexed_subset(data, &train_idx);
        let resampled = spec
            .sampler
            .resample(&train, seeding::fold_seed(spec.seed, f, stream::SAMPLER))?;
        assert!(resampled.n_positive() > 0, "resampled training fold lost its minority class");
        let model = spec
            .classifier
            .fit(&resampled, None, seeding::fold_seed(spec.seed, f, stream::CLASSIFIER))?;
        let records: Vec<Record> = test_idx.iter().map(|&i| predict_into(&model, data, i, None)).collect();
        let metrics = report(records.iter(), spec.beta)?;
        let (train_indices, train_synthetic) = original_indices(&resampled);
        let mut warnings = Vec::new();
        if let Some(w) = resampled.minority_warning() {
            warnings.push(format!("fold {f}: {w}"));
        }
        Ok(FoldResult {
            fold: f,
            metrics,
            records,
            groups: Vec::new(),
            train_indices,
            train_synthetic,
            warnings,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    aggregate(folds, spec.beta, false)
}

/// Subset whose instances carry their dataset index as origin row, so that
/// resampled training material can be traced back to dataset indices.
fn indexed_subset(data: &Dataset, indices: &[usize]) -> Dataset {
    data.with_instances(
        indices
            .iter()
            .map(|&i| {
                let x = &data.instances[i];
                Instance {
                    origin: crate::dataset::Origin::Row(i),
                    ..x.clone()
                }
            })
            .collect(),
    )
}

fn aggregate(folds: Vec<FoldResult>, beta: f64, clustered: bool) -> Result<CvResult> {
    let pooled = report(folds.iter().flat_map(|f| f.records.iter()), beta)?;
    let per_fold: Vec<MetricsReport> = folds.iter().map(|f| f.metrics).collect();
    let fold_mean = MetricsReport::mean(&per_fold).ok_or_else(|| Error::invalid("no folds"))?;
    let warnings = folds.iter().flat_map(|f| f.warnings.iter().cloned()).collect();
    let mut out = CvResult {
        folds,
        pooled,
        fold_mean,
        group_weighted: None,
        warnings,
    };
    if clustered {
        let groups: Vec<MetricsReport> = [IrGroup::LowIr, IrGroup::HighIr]
            .into_iter()
            .map(|g| out.group_pooled(g, beta))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        out.group_weighted = MetricsReport::weighted_mean(&groups);
    }
    Ok(out)
}

/// Cross-validation of the clustering-RUS pipeline.
///
/// In every fold the cluster partition is fitted on the training portion
/// only, the flagged clusters are undersampled, one classifier is trained per
/// non-empty group and each test instance is scored by the classifier of the
/// group its nearest centroid belongs to.
pub fn run_cv_clustered(data: &Dataset, spec: &ExperimentSpec) -> Result<CvResult> {
    spec.validate()?;
    let SamplerSpec::ClusteringRus {
        cluster_k,
        max_cluster_k,
        threshold,
        spread,
        policy,
    } = spec.sampler
    else {
        return Err(Error::invalid("run_cv_clustered needs a clustering_rus sampler"));
    };
    let split = data.stratified_kfold(spec.k_folds, seeding::derive(spec.seed, stream::FOLDS))?;
    let folds = par::map_range(spec.k_folds, |f| -> Result<FoldResult> {
        let train_idx = split.train_indices(f);
        let test_idx = split.test_indices(f);
        let train = indexed_subset(data, &train_idx);
        let t = threshold.resolve(&train)?;
        let cluster_seed = seeding::fold_seed(spec.seed, f, stream::CLUSTERING);
        let part = plan_partition(&train, cluster_k, max_cluster_k, t, cluster_seed, policy)?;
        let rus = RusConfig::new(spread, seeding::fold_seed(spec.seed, f, stream::SAMPLER));
        let training = apply_clustering_rus(&train, &part, &rus)?;
        let mut warnings: Vec<String> = part
            .warnings
            .iter()
            .chain(&training.warnings)
            .map(|w| format!("fold {f}: {w}"))
            .collect();

        let mut models: [Option<TrainedModel>; 2] = [None, None];
        for (slot, group, s) in [(0, IrGroup::LowIr, stream::CLASSIFIER), (1, IrGroup::HighIr, stream::HIGH_GROUP)] {
            let g = training.group(group);
            if !g.is_empty() {
                models[slot] = Some(spec.classifier.fit(g, None, seeding::fold_seed(spec.seed, f, s))?);
            }
        }
        let model_of = |g: IrGroup| models[(g == IrGroup::HighIr) as usize].as_ref();
        let mut fallbacks = [0usize; 2];
        let mut records = Vec::with_capacity(test_idx.len());
        for &i in &test_idx {
            let group = part.route(&data.instances[i])?;
            let model = match model_of(group) {
                Some(m) => m,
                None => {
                    fallbacks[(group == IrGroup::HighIr) as usize] += 1;
                    model_of(group.other()).ok_or(Error::EmptyTraining)?
                }
            };
            records.push(predict_into(model, data, i, Some(group)));
        }
        for (g, n) in [IrGroup::LowIr, IrGroup::HighIr].into_iter().zip(fallbacks) {
            if n > 0 {
                warnings.push(format!(
                    "fold {f}: {} group has no training data; {n} test instances scored by the {} model",
                    g.name(),
                    g.other().name()
                ));
            }
        }

        let mut groups = Vec::new();
        for g in [IrGroup::LowIr, IrGroup::HighIr] {
            let recs: Vec<&Record> = records.iter().filter(|r| r.group == Some(g)).collect();
            let metrics = if recs.is_empty() {
                None
            } else {
                Some(report(recs.iter().copied(), spec.beta)?)
            };
            groups.push(GroupResult {
                group: g,
                train_size: training.group(g).len(),
                test_size: recs.len(),
                metrics,
            });
        }
        let group_reports: Vec<MetricsReport> = groups.iter().filter_map(|g| g.metrics).collect();
        let metrics = MetricsReport::weighted_mean(&group_reports).ok_or_else(|| Error::invalid("empty test fold"))?;

        let mut train_indices: Vec<usize> = training
            .low
            .instances
            .iter()
            .chain(&training.high.instances)
            .map(Instance::row)
            .collect();
        train_indices.sort_unstable();
        Ok(FoldResult {
            fold: f,
            metrics,
            records,
            groups,
            train_indices,
            train_synthetic: 0,
            warnings,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    aggregate(folds, spec.beta, true)
}

/// Fits the cluster partition, growing k from `cluster_k` to `max_cluster_k`
/// while every cluster stays above the threshold.
pub fn plan_partition(
    train: &Dataset,
    cluster_k: usize,
    max_cluster_k: Option<usize>,
    threshold: f64,
    seed: u64,
    policy: UndersamplePolicy,
) -> Result<ClusterPartition> {
    let max_k = max_cluster_k.unwrap_or(cluster_k).max(cluster_k);
    let mut k = cluster_k;
    loop {
        match plan_cluster_partition(train, k, threshold, seed, policy) {
            Err(Error::IncreaseClusterCount { .. }) if k < max_k && k < train.len() => k += 1,
            other => return other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub size: usize,
    /// Majority:minority ratio inside the blob.
    pub imbalance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub blobs: Vec<BlobSpec>,
    pub numeric_dims: usize,
    pub nominal_dims: usize,
    pub nominal_categories: usize,
    /// Standard deviation of the Gaussian noise around each class mean.
    pub noise: f64,
    /// Distance between consecutive blob centers along every numeric axis.
    pub separation: f64,
    /// Offset of the positive-class mean from its blob center.
    pub class_shift: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(blobs: Vec<BlobSpec>, seed: u64) -> Self {
        Self {
            blobs,
            numeric_dims: 2,
            nominal_dims: 0,
            nominal_categories: 3,
            noise: 1.0,
            separation: 10.0,
            class_shift: 1.5,
            seed,
        }
    }

    /// Positives of a blob: `round(size / (1 + ir))`, kept in `[1, size - 1]`.
    pub fn blob_positives(blob: &BlobSpec) -> usize {
        let p = (blob.size as f64 / (1.0 + blob.imbalance_ratio)).round() as usize;
        p.clamp(1, blob.size.saturating_sub(1).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.blobs.is_empty() {
            return Err(Error::invalid("at least one blob is required"));
        }
        if let Some(b) = self.blobs.iter().find(|b| b.size < 2) {
            return Err(Error::invalid(format!("blob size {} is below 2", b.size)));
        }
        if let Some(b) = self.blobs.iter().find(|b| !(b.imbalance_ratio > 0.0) || !b.imbalance_ratio.is_finite()) {
            return Err(Error::invalid(format!("blob imbalance ratio {} must be positive", b.imbalance_ratio)));
        }
        if self.numeric_dims + self.nominal_dims == 0 {
            return Err(Error::invalid("at least one attribute is required"));
        }
        if self.nominal_dims > 0 && self.nominal_categories < 2 {
            return Err(Error::invalid("nominal attributes need at least 2 categories"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::invalid("noise must be a finite value >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Blob of every instance.
    pub blob: Vec<usize>,
}

/// Gaussian blobs with per-blob class priors.
///
/// Blob `b` is centered at `b * separation` on every numeric axis and the
/// positives of the blob are shifted by `class_shift`. Nominal attributes
/// favour category 0 for positives and are uniform for negatives.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut attributes: Vec<AttributeSpec> = (0..cfg.numeric_dims).map(|d| AttributeSpec::numeric(format!("x{d}"))).collect();
    let categories: Vec<String> = (0..cfg.nominal_categories).map(|c| format!("c{c}")).collect();
    for d in 0..cfg.nominal_dims {
        attributes.push(AttributeSpec::nominal(format!("g{d}"), categories.clone()));
    }
    let schema = Schema::new(attributes, "class", "negative", "positive")?;
    let mut rng = seeding::rng(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rows = Vec::new();
    for (b, blob) in cfg.blobs.iter().enumerate() {
        let positives = SyntheticConfig::blob_positives(blob);
        let center = b as f64 * cfg.separation;
        for i in 0..blob.size {
            let label = if i < positives {
                ClassLabel::Positive
            } else {
                ClassLabel::Negative
            };
            let mean = center + if label.is_positive() { cfg.class_shift } else { 0.0 };
            let mut values: Vec<f64> = (0..cfg.numeric_dims).map(|_| mean + noise.sample(&mut rng)).collect();
            for _ in 0..cfg.nominal_dims {
                let c = if label.is_positive() && rng.random_bool(0.6) {
                    0
                } else {
                    rng.random_range(0..cfg.nominal_categories)
                };
                values.push(c as f64);
            }
            rows.push((values, label, b));
        }
    }
    rows.shuffle(&mut rng);
    let blob = rows.iter().map(|r| r.2).collect();
    let dataset = Dataset::from_rows(schema, rows.into_iter().map(|(v, l, _)| (v, l)).collect())?;
    Ok(SyntheticData { dataset, blob })
}
