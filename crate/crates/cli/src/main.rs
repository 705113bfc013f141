//! `crus`: experiment runner for clustering-based random undersampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crus::ensembles::ModelFile;
use crus::evaluation::{gen_synthetic, BlobSpec, SyntheticConfig};
use crus::feature_select::{cfs_best_first, gain_ratio_rank};
use crus::{par, ClassLabel, Dataset};

use config::{FeatselConfig, RunConfig};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "crus", version, about = "Resampling experiments for imbalanced binary classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate every sampler x classifier pair of a config and compare them.
    Run(RunArgs),
    /// Generate a Gaussian-blob dataset with per-blob class imbalance.
    GenSynth(SynthArgs),
    /// Rank attributes by gain ratio and select a subset with CFS.
    Featsel {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the rules of a saved tree or ensemble.
    Rules { model: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the significance level of the config.
    #[arg(long)]
    alpha: Option<f64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated `size:imbalance_ratio` pairs, one per blob.
    #[arg(long, default_value = "1000:2,1000:20")]
    blobs: String,
    #[arg(long, default_value_t = 2)]
    numeric_dims: usize,
    #[arg(long, default_value_t = 0)]
    nominal_dims: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 1.5)]
    class_shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
        Command::Featsel { config, out } => cmd_featsel(&config, out),
        Command::Rules { model } => cmd_rules(&model),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(o) = args.out {
        cfg.output = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    match args.jobs {
        Some(0) => bail!("--jobs must be >= 1"),
        Some(1) => {
            par::set_parallel(false);
            run::cmd_run(&cfg)
        }
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start the worker pool")?
            .install(|| run::cmd_run(&cfg)),
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            eprintln!("note: built without parallel support; running sequentially");
            run::cmd_run(&cfg)
        }
        None => run::cmd_run(&cfg),
    }
}

fn parse_blobs(text: &str) -> Result<Vec<BlobSpec>> {
    text.split(',')
        .map(|part| {
            let (size, ir) = part
                .trim()
                .split_once(':')
                .with_context(|| format!("blob '{part}' must look like size:imbalance_ratio"))?;
            Ok(BlobSpec {
                size: size.trim().parse().with_context(|| format!("bad blob size '{size}'"))?,
                imbalance_ratio: ir.trim().parse().with_context(|| format!("bad imbalance ratio '{ir}'"))?,
            })
        })
        .collect()
}

fn ir_text(neg: usize, pos: usize) -> String {
    if pos == 0 {
        "inf".into()
    } else {
        format!("{:.2}", neg as f64 / pos as f64)
    }
}

fn cmd_gen_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = SyntheticConfig::new(parse_blobs(&args.blobs)?, args.seed);
    cfg.numeric_dims = args.numeric_dims;
    cfg.nominal_dims = args.nominal_dims;
    cfg.noise = args.noise;
    cfg.class_shift = args.class_shift;
    let synth = gen_synthetic(&cfg)?;
    let data = &synth.dataset;

    let out = OutputDir::create(&args.out)?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    out.write("data.csv", std::str::from_utf8(&csv)?)?;
    out.write("schema.toml", &data.schema.to_toml_string())?;
    let path = out.commit()?;

    let (neg, pos) = data.class_counts();
    println!("instances: {} ({neg} negative, {pos} positive)", data.len());
    println!("global imbalance ratio: {}", ir_text(neg, pos));
    for b in 0..cfg.blobs.len() {
        let (mut bn, mut bp) = (0, 0);
        for (x, _) in data.instances.iter().zip(&synth.blob).filter(|(_, &blob)| blob == b) {
            match x.label {
                ClassLabel::Positive => bp += 1,
                ClassLabel::Negative => bn += 1,
            }
        }
        println!("blob {b}: {} instances, imbalance ratio {}", bn + bp, ir_text(bn, bp));
    }
    println!("written to {}", path.display());
    Ok(())
}

fn cmd_featsel(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = FeatselConfig::load(config)?;
    if let Some(o) = out {
        cfg.output = o;
    }
    for (what, p) in [("dataset", &cfg.dataset), ("schema", &cfg.schema)] {
        if !p.is_file() {
            bail!("{what} file not found: {}", p.display());
        }
    }
    let data = Dataset::load_csv(&cfg.dataset, &cfg.schema)?;
    let ranked = gain_ratio_rank(&data)?;
    let cfs = cfs_best_first(&data, cfg.max_stale)?;
    let out = OutputDir::create(&cfg.output)?;
    out.write("gain_ratio.csv", &ranked.to_csv())?;
    out.write("gain_ratio.md", &ranked.to_markdown())?;
    out.write("cfs.csv", &cfs.to_csv())?;
    out.write("cfs.md", &cfs.to_markdown())?;
    let path = out.commit()?;
    print!("{}", ranked.to_markdown());
    println!();
    print!("{}", cfs.to_markdown());
    eprintln!("results written to {}", path.display());
    Ok(())
}

fn cmd_rules(model: &Path) -> Result<()> {
    let m = ModelFile::load(model)?;
    for line in m.rules() {
        println!("{line}");
    }
    Ok(())
}
