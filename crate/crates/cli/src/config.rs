//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crus::ensembles::ClassifierSpec;
use crus::evaluation::{SamplerSpec, ThresholdSpec};
use crus::metrics::METRIC_COLUMNS;
use crus::resampling::UndersamplePolicy;
use crus::trees::{AttributeSampling, TreeConfig};
use serde::Deserialize;

fn default_k_folds() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.05
}

fn default_metrics() -> Vec<String> {
    ["accuracy", "g_mean", "op", "auc"].map(String::from).to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Metrics compared across cells.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub block: BlockMode,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub save_models: bool,
    #[serde(default, rename = "sampler")]
    pub samplers: Vec<SamplerBlock>,
    #[serde(default, rename = "classifier")]
    pub classifiers: Vec<ClassifierBlock>,
}

/// What forms a block (row) of the comparison matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// One block per cross-validation fold.
    #[default]
    Fold,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub name: Option<String>,
    pub method: String,
    pub spread: Option<f64>,
    pub percentage: Option<u32>,
    pub k_neighbors: Option<usize>,
    pub cluster_k: Option<usize>,
    pub max_cluster_k: Option<usize>,
    pub threshold: Option<f64>,
    pub reduction_fraction: Option<f64>,
    pub policy: Option<UndersamplePolicy>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierBlock {
    pub name: Option<String>,
    pub method: String,
    pub base: Option<String>,
    pub n_members: Option<usize>,
    pub base_members: Option<usize>,
    pub min_leaf: Option<f64>,
    pub pruning: Option<bool>,
    pub confidence: Option<f64>,
    pub subspace: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Named<T> {
    pub name: String,
    pub spec: T,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.schema, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() || self.classifiers.is_empty() {
            bail!("the grid needs at least one [[sampler]] and one [[classifier]]");
        }
        if self.k_folds < 2 {
            bail!("k_folds must be >= 2");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must be in (0, 1)");
        }
        for m in &self.metrics {
            if m == "n" || !METRIC_COLUMNS.contains(&m.as_str()) {
                bail!("unknown metric '{m}'; expected one of {}", METRIC_COLUMNS[1..].join(", "));
            }
        }
        for (what, p) in [("dataset", &self.dataset), ("schema", &self.schema)] {
            if !p.is_file() {
                bail!("{what} file not found: {}", p.display());
            }
        }
        Ok(())
    }

    pub fn sampler_specs(&self) -> Result<Vec<Named<SamplerSpec>>> {
        let out: Vec<Named<SamplerSpec>> = self.samplers.iter().map(sampler_spec).collect::<Result<_>>()?;
        unique_names(out.iter().map(|n| n.name.as_str()), "sampler")?;
        Ok(out)
    }

    pub fn classifier_specs(&self) -> Result<Vec<Named<ClassifierSpec>>> {
        let out: Vec<Named<ClassifierSpec>> = self.classifiers.iter().map(classifier_spec).collect::<Result<_>>()?;
        unique_names(out.iter().map(|n| n.name.as_str()), "classifier")?;
        Ok(out)
    }
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            bail!("{what} name '{n}' must be non-empty and use only letters, digits, '_' or '-'");
        }
        if !seen.insert(n) {
            bail!("duplicate {what} name '{n}'");
        }
    }
    Ok(())
}

fn unused(block_name: &str, fields: &[(&str, bool)]) -> Result<()> {
    if let Some((f, _)) = fields.iter().find(|(_, set)| *set) {
        bail!("{block_name}: key '{f}' does not apply to this method");
    }
    Ok(())
}

fn sampler_spec(b: &SamplerBlock) -> Result<Named<SamplerSpec>> {
    let name = b.name.clone().unwrap_or_else(|| b.method.clone());
    let ctx = format!("sampler '{name}'");
    let spec = match b.method.as_str() {
        "none" => {
            unused(
                &ctx,
                &[
                    ("spread", b.spread.is_some()),
                    ("percentage", b.percentage.is_some()),
                    ("cluster_k", b.cluster_k.is_some()),
                    ("threshold", b.threshold.is_some()),
                ],
            )?;
            SamplerSpec::None
        }
        "rus" => {
            unused(&ctx, &[("percentage", b.percentage.is_some()), ("cluster_k", b.cluster_k.is_some())])?;
            SamplerSpec::Rus {
                spread: positive(b.spread.unwrap_or(4.0), &ctx, "spread")?,
            }
        }
        "smote" => {
            unused(&ctx, &[("spread", b.spread.is_some()), ("cluster_k", b.cluster_k.is_some())])?;
            let percentage = b.percentage.unwrap_or(100);
            if percentage == 0 {
                bail!("{ctx}: percentage must be >= 1");
            }
            SamplerSpec::Smote {
                percentage,
                k_neighbors: b.k_neighbors.unwrap_or(5),
            }
        }
        "clustering_rus" => {
            unused(&ctx, &[("percentage", b.percentage.is_some()), ("k_neighbors", b.k_neighbors.is_some())])?;
            let threshold = match (b.threshold, b.reduction_fraction) {
                (Some(_), Some(_)) => bail!("{ctx}: set either threshold or reduction_fraction, not both"),
                (Some(t), None) => ThresholdSpec::Fixed(positive(t, &ctx, "threshold")?),
                (None, Some(f)) => {
                    if !(0.0..1.0).contains(&f) {
                        bail!("{ctx}: reduction_fraction must be in [0, 1)");
                    }
                    ThresholdSpec::Reduction(f)
                }
                (None, None) => ThresholdSpec::Fixed(10.0),
            };
            let cluster_k = b.cluster_k.unwrap_or(2);
            if cluster_k < 2 {
                bail!("{ctx}: cluster_k must be >= 2");
            }
            if b.max_cluster_k.is_some_and(|m| m < cluster_k) {
                bail!("{ctx}: max_cluster_k must be >= cluster_k");
            }
            SamplerSpec::ClusteringRus {
                cluster_k,
                max_cluster_k: b.max_cluster_k,
                threshold,
                spread: positive(b.spread.unwrap_or(4.0), &ctx, "spread")?,
                policy: b.policy.unwrap_or_default(),
            }
        }
        other => bail!("{ctx}: unknown method '{other}' (none, rus, smote, clustering_rus)"),
    };
    Ok(Named { name, spec })
}

fn positive(v: f64, ctx: &str, key: &str) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{ctx}: {key} must be a positive number");
    }
    Ok(v)
}

fn tree_config(b: &ClassifierBlock, mut t: TreeConfig, ctx: &str) -> Result<TreeConfig> {
    if let Some(m) = b.min_leaf {
        t.min_leaf_weight = m;
    }
    if let Some(p) = b.pruning {
        t.use_pruning = p;
    }
    if let Some(c) = b.confidence {
        t.confidence_factor = c;
    }
    if let Some(s) = &b.subspace {
        t.attribute_sampling = match s.as_str() {
            "all" => AttributeSampling::All,
            "breiman" => AttributeSampling::Breiman,
            "breiman_ceil" => AttributeSampling::BreimanCeil,
            n => AttributeSampling::Fixed(
                n.parse()
                    .with_context(|| format!("{ctx}: subspace must be all, breiman, breiman_ceil or a number"))?,
            ),
        };
    }
    t.validate().with_context(|| ctx.to_string())?;
    Ok(t)
}

fn single(method: &str, b: &ClassifierBlock, ctx: &str) -> Result<ClassifierSpec> {
    Ok(match method {
        "j48" => ClassifierSpec::Tree {
            tree: tree_config(b, TreeConfig::j48(), ctx)?,
        },
        "random_tree" => ClassifierSpec::Tree {
            tree: tree_config(b, TreeConfig::random_tree(0), ctx)?,
        },
        other => bail!("{ctx}: unknown tree '{other}' (j48, random_tree)"),
    })
}

fn classifier_spec(b: &ClassifierBlock) -> Result<Named<ClassifierSpec>> {
    let name = b.name.clone().unwrap_or_else(|| match &b.base {
        Some(base) => format!("{}-{base}", b.method),
        None => b.method.clone(),
    });
    let ctx = format!("classifier '{name}'");
    let members = |default: usize| -> Result<usize> {
        let n = b.n_members.unwrap_or(default);
        if n == 0 {
            bail!("{ctx}: n_members must be >= 1");
        }
        Ok(n)
    };
    let spec = match b.method.as_str() {
        "j48" | "random_tree" => {
            if b.base.is_some() || b.n_members.is_some() {
                bail!("{ctx}: single trees take no base or n_members");
            }
            single(&b.method, b, &ctx)?
        }
        "random_forest" => {
            if b.base.is_some() {
                bail!("{ctx}: random_forest takes no base");
            }
            ClassifierSpec::RandomForest {
                n_members: members(100)?,
                tree: tree_config(b, TreeConfig::random_tree(0), &ctx)?,
            }
        }
        "bagging" | "adaboost" | "random_committee" => {
            let base_name = b.base.as_deref().unwrap_or(if b.method == "random_committee" {
                "random_tree"
            } else {
                "j48"
            });
            let base = match base_name {
                "random_forest" => ClassifierSpec::RandomForest {
                    n_members: b.base_members.unwrap_or(100),
                    tree: tree_config(b, TreeConfig::random_tree(0), &ctx)?,
                },
                other => single(other, b, &ctx)?,
            };
            let n = members(10)?;
            match b.method.as_str() {
                "bagging" => ClassifierSpec::bagging(n, base),
                "adaboost" => ClassifierSpec::adaboost(n, base),
                _ => ClassifierSpec::random_committee(n, base),
            }
        }
        other => bail!("{ctx}: unknown method '{other}' (j48, random_tree, random_forest, bagging, adaboost, random_committee)"),
    };
    spec.validate().with_context(|| ctx.clone())?;
    Ok(Named { name, spec })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatselConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_featsel_output")]
    pub output: PathBuf,
    #[serde(default = "default_max_stale")]
    pub max_stale: usize,
}

fn default_featsel_output() -> PathBuf {
    PathBuf::from("featsel")
}

fn default_max_stale() -> usize {
    5
}

impl FeatselConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FeatselConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.schema, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
