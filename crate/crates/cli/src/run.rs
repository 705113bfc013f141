//! The `run` command: a sampler x classifier grid of cross-validated
//! experiments followed by comparison reports.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use crus::ensembles::{ClassifierSpec, ModelFile};
use crus::evaluation::{plan_partition, run_cv, CvResult, ExperimentSpec, SamplerSpec};
use crus::metrics::{MetricsReport, METRIC_COLUMNS};
use crus::resampling::{apply_clustering_rus, IrGroup, RusConfig};
use crus::seeding::{self, stream};
use crus::stats_compare::{average_combined_loss, cd_diagram, compare, loss_vs_best, ComparisonReport, ScoreMatrix};
use crus::{par, Dataset};

use crate::config::{BlockMode, Named, RunConfig};
use crate::output::OutputDir;

pub struct Cell<'a> {
    pub sampler: &'a Named<SamplerSpec>,
    pub classifier: &'a Named<ClassifierSpec>,
}

impl Cell<'_> {
    pub fn id(&self) -> String {
        format!("{}__{}", self.sampler.name, self.classifier.name)
    }

    fn label(&self) -> String {
        format!("{}/{}", self.sampler.name, self.classifier.name)
    }
}

fn higher_is_better(metric: &str) -> bool {
    metric != "fpr"
}

pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let samplers = cfg.sampler_specs()?;
    let classifiers = cfg.classifier_specs()?;
    let data = Dataset::load_csv(&cfg.dataset, &cfg.schema)?;
    let cells: Vec<Cell> = samplers
        .iter()
        .flat_map(|s| classifiers.iter().map(move |c| Cell { sampler: s, classifier: c }))
        .collect();
    eprintln!(
        "running {} cells ({} samplers x {} classifiers), {} folds, {} instances",
        cells.len(),
        samplers.len(),
        classifiers.len(),
        cfg.k_folds,
        data.len()
    );

    let results: Vec<Result<CvResult>> = par::map_slice(&cells, |cell| {
        let spec = ExperimentSpec {
            sampler: cell.sampler.spec,
            classifier: cell.classifier.spec.clone(),
            k_folds: cfg.k_folds,
            seed: cfg.seed,
            beta: 1.0,
        };
        run_cv(&data, &spec).with_context(|| format!("cell {} failed", cell.label()))
    });
    let results: Vec<CvResult> = results.into_iter().collect::<Result<_>>()?;

    let out = OutputDir::create(&cfg.output)?;
    let mut notes = Vec::new();
    for (cell, r) in cells.iter().zip(&results) {
        out.write(&format!("cells/{}.csv", cell.id()), &cell_csv(r)?)?;
    }
    out.write("summary.csv", &summary_csv(&cells, &results, |r| Some(r.pooled)))?;
    out.write("summary_fold_mean.csv", &summary_csv(&cells, &results, |r| Some(r.fold_mean)))?;
    if results.iter().any(|r| r.group_weighted.is_some()) {
        out.write("summary_group_weighted.csv", &summary_csv(&cells, &results, |r| r.group_weighted))?;
    }
    out.write("tpr_tnr.csv", &tpr_tnr_csv(&cells, &results))?;

    let mut comparison = String::from("# Comparison of sampler/classifier pairs\n\n");
    for metric in &cfg.metrics {
        if cells.len() < 2 {
            notes.push("a single cell has nothing to be compared with; comparison skipped".to_string());
            break;
        }
        match comparison_for(metric, cfg, &cells, &results)? {
            Some(report) => {
                comparison.push_str(&report_markdown(&report));
                out.write(&format!("comparison/{metric}_pvalues_raw.csv"), &pvalue_csv(&report, false))?;
                out.write(&format!("comparison/{metric}_pvalues_holm.csv"), &pvalue_csv(&report, true))?;
                out.write(&format!("comparison/{metric}_ranks.csv"), &ranks_csv(&report))?;
                let cd = cd_diagram(&report, cfg.alpha);
                out.write(&format!("comparison/{metric}_cd.svg"), &cd.to_svg())?;
                out.write(&format!("comparison/{metric}_cd.txt"), &cd.to_text())?;
            }
            None => notes.push(format!("{metric}: some fold has no value (single-class fold); not compared")),
        }
        match loss_table(metric, &cells, &results) {
            Ok((csv, md)) => {
                out.write(&format!("losses/{metric}.csv"), &csv)?;
                out.write(&format!("losses/{metric}.md"), &md)?;
            }
            Err(e) => notes.push(format!("{metric}: loss table skipped ({e})")),
        }
    }
    out.write("comparison/report.md", &comparison)?;

    if cfg.save_models {
        for cell in &cells {
            save_models(&out, cell, &data, cfg.seed).with_context(|| format!("saving models of {}", cell.label()))?;
        }
    }
    out.write("manifest.txt", &manifest(cfg, &data, &cells, &results, &notes))?;
    let path = out.commit()?;
    for n in &notes {
        eprintln!("note: {n}");
    }
    eprintln!("results written to {}", path.display());
    Ok(())
}

fn cells_row(label: &str, m: &MetricsReport) -> String {
    format!("{label},{}\n", m.csv_cells().join(","))
}

fn header(first: &str) -> String {
    format!("{first},{}\n", METRIC_COLUMNS.join(","))
}

fn cell_csv(r: &CvResult) -> Result<String> {
    let mut s = header("view");
    for f in &r.folds {
        s.push_str(&cells_row(&format!("fold_{}", f.fold), &f.metrics));
    }
    s.push_str(&cells_row("pooled", &r.pooled));
    s.push_str(&cells_row("fold_mean", &r.fold_mean));
    if let Some(w) = &r.group_weighted {
        s.push_str(&cells_row("group_weighted", w));
        for g in [IrGroup::LowIr, IrGroup::HighIr] {
            if let Some(m) = r.group_pooled(g, 1.0)? {
                s.push_str(&cells_row(g.name(), &m));
            }
        }
    }
    Ok(s)
}

fn summary_csv(cells: &[Cell], results: &[CvResult], view: impl Fn(&CvResult) -> Option<MetricsReport>) -> String {
    let mut s = format!("sampler,classifier,{}\n", METRIC_COLUMNS.join(","));
    for (cell, r) in cells.iter().zip(results) {
        if let Some(m) = view(r) {
            s.push_str(&format!("{},{},{}\n", cell.sampler.name, cell.classifier.name, m.csv_cells().join(",")));
        }
    }
    s
}

fn tpr_tnr_csv(cells: &[Cell], results: &[CvResult]) -> String {
    let mut s = String::from("sampler,classifier,tpr,tnr\n");
    for (cell, r) in cells.iter().zip(results) {
        s.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            cell.sampler.name, cell.classifier.name, r.pooled.tpr, r.pooled.tnr
        ));
    }
    s
}

/// Folds as blocks, cells as treatments.
fn comparison_for(metric: &str, cfg: &RunConfig, cells: &[Cell], results: &[CvResult]) -> Result<Option<ComparisonReport>> {
    let mut rows = vec![Vec::with_capacity(cells.len()); cfg.k_folds];
    for r in results {
        for (f, fold) in r.folds.iter().enumerate() {
            match fold.metrics.get(metric) {
                Some(v) => rows[f].push(v),
                None => return Ok(None),
            }
        }
    }
    let m = ScoreMatrix::new(metric, higher_is_better(metric), cells.iter().map(Cell::label).collect(), rows)?;
    Ok(Some(compare(&m, cfg.alpha)?))
}

fn report_markdown(r: &ComparisonReport) -> String {
    let mut s = format!(
        "## {}\n\nFriedman chi-square {:.4} (df {}), p = {:.6}\n\n| treatment | average rank |\n|---|---:|\n",
        r.metric, r.friedman.statistic, r.friedman.df, r.friedman.p_value
    );
    let mut order: Vec<usize> = (0..r.treatments.len()).collect();
    order.sort_by(|&a, &b| r.friedman.average_ranks[a].total_cmp(&r.friedman.average_ranks[b]).then(a.cmp(&b)));
    for &i in &order {
        let _ = writeln!(s, "| {} | {:.3} |", r.treatments[i], r.friedman.average_ranks[i]);
    }
    let _ = write!(
        s,
        "\nPairwise Wilcoxon signed-rank, Holm-adjusted (alpha {}):\n\n| A | B | p raw | p Holm | significant |\n|---|---|---:|---:|---|\n",
        r.alpha
    );
    for i in 0..r.treatments.len() {
        for j in i + 1..r.treatments.len() {
            let _ = writeln!(
                s,
                "| {} | {} | {:.6} | {:.6} | {} |",
                r.treatments[i],
                r.treatments[j],
                r.pairwise_raw[i][j],
                r.pairwise_holm[i][j],
                if r.pairwise_holm[i][j] < r.alpha { "yes" } else { "no" }
            );
        }
    }
    s.push_str("\nGroups without significant differences:\n\n");
    for c in &r.cliques {
        let names: Vec<&str> = c.iter().map(|&i| r.treatments[i].as_str()).collect();
        let _ = writeln!(s, "- {}", names.join(", "));
    }
    s.push('\n');
    s
}

fn pvalue_csv(r: &ComparisonReport, holm: bool) -> String {
    let m = if holm { &r.pairwise_holm } else { &r.pairwise_raw };
    let mut s = format!("treatment,{}\n", r.treatments.join(","));
    for (name, row) in r.treatments.iter().zip(m) {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(s, "{name},{}", cells.join(","));
    }
    s
}

fn ranks_csv(r: &ComparisonReport) -> String {
    let mut s = String::from("treatment,average_rank\n");
    for (name, rank) in r.treatments.iter().zip(&r.friedman.average_ranks) {
        let _ = writeln!(s, "{name},{rank:.6}");
    }
    s
}

/// Loss of every cell against the best cell, plus the combined loss with
/// accuracy for metrics other than accuracy.
fn loss_table(metric: &str, cells: &[Cell], results: &[CvResult]) -> Result<(String, String)> {
    let values: Vec<f64> = results
        .iter()
        .map(|r| r.pooled.get(metric).ok_or_else(|| anyhow::anyhow!("pooled {metric} undefined")))
        .collect::<Result<_>>()?;
    let losses = loss_vs_best(&values, higher_is_better(metric))?;
    let combined = if metric == "accuracy" {
        None
    } else {
        let acc: Vec<f64> = results.iter().map(|r| r.pooled.accuracy).collect();
        let acc_loss = loss_vs_best(&acc, true)?;
        Some(acc_loss.iter().zip(&losses).map(|(a, b)| average_combined_loss(*a, *b)).collect::<Vec<_>>())
    };
    let mut csv = format!("sampler,classifier,{metric},loss_pct");
    let mut md = format!("| sampler | classifier | {metric} | % loss vs best |");
    if combined.is_some() {
        csv.push_str(",avg_loss_with_accuracy_pct");
        md.push_str(" % average loss with accuracy |\n|---|---|---:|---:|---:|\n");
    } else {
        md.push_str("\n|---|---|---:|---:|\n");
    }
    csv.push('\n');
    for (i, cell) in cells.iter().enumerate() {
        let _ = write!(csv, "{},{},{:.6},{:.4}", cell.sampler.name, cell.classifier.name, values[i], losses[i]);
        let _ = write!(
            md,
            "| {} | {} | {:.3} | {:.2} |",
            cell.sampler.name, cell.classifier.name, values[i], losses[i]
        );
        if let Some(c) = &combined {
            let _ = write!(csv, ",{:.4}", c[i]);
            let _ = write!(md, " {:.2} |", c[i]);
        }
        csv.push('\n');
        md.push('\n');
    }
    Ok((csv, md))
}

/// Fits the cell's pipeline on the whole dataset and saves the models.
fn save_models(out: &OutputDir, cell: &Cell, data: &Dataset, master: u64) -> Result<()> {
    let id = cell.id();
    let schema = (*data.schema).clone();
    let sampler_seed = seeding::derive(master, stream::SAMPLER);
    let model_file = |d: &Dataset, s: u64| -> Result<ModelFile> {
        Ok(ModelFile {
            schema: schema.clone(),
            spec: cell.classifier.spec.clone(),
            model: cell.classifier.spec.fit(d, None, s)?,
        })
    };
    match cell.sampler.spec {
        SamplerSpec::ClusteringRus { spread, .. } => {
            let part = plan_partition_of(&cell.sampler.spec, data, seeding::derive(master, stream::CLUSTERING))?;
            let training = apply_clustering_rus(data, &part, &RusConfig::new(spread, sampler_seed))?;
            out.write(&format!("models/{id}.clusters.json"), &part.cluster_model.to_json())?;
            for (g, s) in [(IrGroup::LowIr, stream::CLASSIFIER), (IrGroup::HighIr, stream::HIGH_GROUP)] {
                let d = training.group(g);
                if !d.is_empty() {
                    let m = model_file(d, seeding::derive(master, s))?;
                    out.write(&format!("models/{id}.{}.json", g.name()), &m.to_json())?;
                }
            }
        }
        ref s => {
            let resampled = s.resample(data, sampler_seed)?;
            let m = model_file(&resampled, seeding::derive(master, stream::CLASSIFIER))?;
            out.write(&format!("models/{id}.json"), &m.to_json())?;
        }
    }
    Ok(())
}

fn plan_partition_of(spec: &SamplerSpec, data: &Dataset, seed: u64) -> Result<crus::resampling::ClusterPartition> {
    let SamplerSpec::ClusteringRus {
        cluster_k,
        max_cluster_k,
        threshold,
        policy,
        ..
    } = *spec
    else {
        anyhow::bail!("not a clustering_rus sampler");
    };
    Ok(plan_partition(data, cluster_k, max_cluster_k, threshold.resolve(data)?, seed, policy)?)
}

fn manifest(cfg: &RunConfig, data: &Dataset, cells: &[Cell], results: &[CvResult], notes: &[String]) -> String {
    let (neg, pos) = data.class_counts();
    let mut s = String::new();
    let _ = writeln!(s, "tool: crus {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "dataset: {}", cfg.dataset.display());
    let _ = writeln!(s, "schema: {}", cfg.schema.display());
    let _ = writeln!(
        s,
        "instances: {} ({} {}, {} {})",
        data.len(),
        neg,
        data.schema.label_name(crus::ClassLabel::Negative),
        pos,
        data.schema.label_name(crus::ClassLabel::Positive)
    );
    let _ = writeln!(s, "k_folds: {}", cfg.k_folds);
    let _ = writeln!(s, "master_seed: {}", cfg.seed);
    let _ = writeln!(s, "fold_seed: {}", seeding::derive(cfg.seed, stream::FOLDS));
    let _ = writeln!(s, "alpha: {}", cfg.alpha);
    let _ = writeln!(
        s,
        "comparison_blocks: {}",
        match cfg.block {
            BlockMode::Fold => "fold",
        }
    );
    let _ = writeln!(s, "metrics: {}", cfg.metrics.join(", "));
    s.push_str("cells:\n");
    for (cell, r) in cells.iter().zip(results) {
        let _ = writeln!(s, "  - id: {}", cell.id());
        let _ = writeln!(s, "    sampler: {:?}", cell.sampler.spec);
        let _ = writeln!(s, "    classifier: {:?}", cell.classifier.spec);
        for w in &r.warnings {
            let _ = writeln!(s, "    warning: {w}");
        }
    }
    if !notes.is_empty() {
        s.push_str("notes:\n");
        for n in notes {
            let _ = writeln!(s, "  - {n}");
        }
    }
    s
}
