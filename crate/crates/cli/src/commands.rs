//! The four subcommands. Each resolves its inputs as flag, then config-file
//! value, then default; reports missing or invalid values by flag name; and
//! writes only deterministic bytes so a rerun with identical inputs
//! reproduces identical artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use divrec::dataset::{parse_ratings_path, split_holdout, RatingsDataset, RatingsFormat, SplitPair};
use divrec::diversity::DistanceMetric;
use divrec::factorization::{train, FactorModel, TrainConfig};
use divrec::harness;
use divrec::postprocess::{diversify_all, write_outcomes_csv, DiversifyConfig, DiversifyStatus};

use crate::config::RunConfig;

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn require<T>(flag: Option<T>, file: Option<T>, flag_name: &str) -> Result<T> {
    let key = flag_name.replace('-', "_");
    flag.or(file).with_context(|| {
        format!("missing required --{flag_name} (pass the flag or set `{key}` in the config file)")
    })
}

fn parse_format(name: &str) -> Result<RatingsFormat> {
    name.parse()
        .map_err(|_| anyhow::anyhow!("invalid --format {name:?}: expected movielens_tab or csv_header"))
}

fn parse_metric(name: &str) -> Result<DistanceMetric> {
    match name {
        "euclidean" => Ok(DistanceMetric::Euclidean),
        "cosine" => Ok(DistanceMetric::Cosine),
        other => bail!("invalid --metric {other:?}: expected euclidean or cosine"),
    }
}

fn load_dataset(path: &Path, format: RatingsFormat) -> Result<RatingsDataset> {
    parse_ratings_path(path, format)
        .with_context(|| format!("cannot parse ratings from {}", path.display()))
}

fn load_model(path: &Path) -> Result<FactorModel> {
    FactorModel::load(path).with_context(|| format!("cannot load model from {}", path.display()))
}

fn split_dataset(ds: &RatingsDataset, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!("invalid --test-fraction {fraction}: must be above 0 and below 1");
    }
    split_holdout(ds, fraction, seed).context("holdout split failed")
}

fn create_output(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create output file {}", path.display())
    })?))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Optional TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ratings file to train on.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input format: movielens_tab or csv_header.
    #[arg(long)]
    format: Option<String>,
    /// Hold this fraction of each user's ratings out of training;
    /// 0 trains on the whole file.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Seed for the holdout split.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Latent dimension of the factor model.
    #[arg(long)]
    d: Option<usize>,
    /// Ridge penalty applied to both factor matrices.
    #[arg(long)]
    lambda: Option<f64>,
    /// Maximum training iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Relative loss-change threshold for early stopping.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for factor initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the model artifact.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the training log CSV (default: the model path with a
    /// .log.csv extension).
    #[arg(long)]
    log: Option<PathBuf>,
}

pub fn run_train(args: TrainArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let data = require(args.data, file.data, "data")?;
    let format = parse_format(&pick(args.format, file.format, "movielens_tab".into()))?;
    let test_fraction = pick(args.test_fraction, file.test_fraction, 0.0);
    let split_seed = pick(args.split_seed, file.split_seed, 1);

    let d = require(args.d, file.d, "d")?;
    if d == 0 {
        bail!("invalid --d: latent dimension must be at least 1");
    }
    let mut cfg = TrainConfig::new(d);
    cfg.lambda_q = pick(args.lambda, file.lambda, cfg.lambda_q);
    cfg.lambda_p = cfg.lambda_q;
    cfg.max_iters = pick(args.iters, file.train_iters, cfg.max_iters);
    cfg.tolerance = pick(args.tolerance, file.tolerance, cfg.tolerance);
    cfg.seed = pick(args.seed, file.seed, cfg.seed);

    let out = pick(
        args.out,
        file.out_dir.map(|dir| dir.join("model.bin")),
        PathBuf::from("model.bin"),
    );
    let log = args.log.unwrap_or_else(|| out.with_extension("log.csv"));

    let ds = load_dataset(&data, format)?;
    let train_set = if test_fraction == 0.0 {
        ds
    } else {
        split_dataset(&ds, test_fraction, split_seed)?.train
    };

    let model = train(&train_set, &cfg)?;
    model
        .save(&out)
        .with_context(|| format!("cannot write model to {}", out.display()))?;

    let report = model.report();
    let mut w = create_output(&log)?;
    writeln!(w, "iter,loss,train_rmse")?;
    for (i, (loss, rmse)) in report
        .loss_history
        .iter()
        .zip(&report.rmse_history)
        .enumerate()
    {
        writeln!(w, "{},{},{}", i + 1, loss, rmse)?;
    }
    w.flush()?;

    println!(
        "trained d={} on {} users x {} items ({} ratings): {} iterations, final train RMSE {:.6}",
        d,
        train_set.n_users(),
        train_set.n_items(),
        train_set.len(),
        report.iterations_run,
        report.final_train_rmse,
    );
    println!("model: {}", out.display());
    println!("training log: {}", log.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Optional TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ratings file; split into train (exclusion masks) and test (relevance truth).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input format: movielens_tab or csv_header.
    #[arg(long)]
    format: Option<String>,
    /// Fraction of each user's ratings held out as relevance truth.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Seed for the holdout split; reuse the training value to score the
    /// model on data it never saw.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Model artifact produced by `divrec train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// List length to evaluate.
    #[arg(long)]
    k: Option<usize>,
    /// Distance metric: euclidean or cosine.
    #[arg(long)]
    metric: Option<String>,
    /// Keep already-rated items eligible instead of filtering them out.
    #[arg(long)]
    include_observed: bool,
    /// Where to write the one-row report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let data = require(args.data, file.data, "data")?;
    let format = parse_format(&pick(args.format, file.format, "movielens_tab".into()))?;
    let test_fraction = pick(args.test_fraction, file.test_fraction, 0.2);
    let split_seed = pick(args.split_seed, file.split_seed, 1);
    let model_path = require(args.model, file.model, "model")?;
    let k = pick(args.k, file.k, 10);
    if k == 0 {
        bail!("invalid --k: list length must be at least 1");
    }
    let metric = parse_metric(&pick(args.metric, file.metric, "euclidean".into()))?;
    let exclude = !(args.include_observed || file.include_observed.unwrap_or(false));
    let out = pick(
        args.out,
        file.out_dir.map(|dir| dir.join("baseline.csv")),
        PathBuf::from("baseline.csv"),
    );

    let ds = load_dataset(&data, format)?;
    let split = split_dataset(&ds, test_fraction, split_seed)?;
    let model = load_model(&model_path)?;

    let row = harness::run_baseline(&model, &split, k, metric, exclude)?;
    let mut w = create_output(&out)?;
    harness::emit_report(std::slice::from_ref(&row), &mut w)?;
    w.flush()?;

    println!(
        "evaluated top-{k}: mean nDCG {:.6}, overall nILLD {:.6}, fraction at floor {:.4}",
        row.mean_ndcg, row.overall_nilld, row.fraction_satisfied,
    );
    println!("report: {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct DiversifyArgs {
    /// Optional TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ratings file; defines which items each user has already seen.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input format: movielens_tab or csv_header.
    #[arg(long)]
    format: Option<String>,
    /// Model artifact produced by `divrec train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// List length to build and re-rank.
    #[arg(long)]
    k: Option<usize>,
    /// Distance metric: euclidean or cosine.
    #[arg(long)]
    metric: Option<String>,
    /// Diversity floor every user's list must reach.
    #[arg(long)]
    alpha: Option<f64>,
    /// Multiplier applied to the rating floor when an iteration cannot swap.
    #[arg(long)]
    discount: Option<f64>,
    /// Iteration cap per user (default: 50 * k).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Keep already-rated items eligible instead of filtering them out.
    #[arg(long)]
    include_observed: bool,
    /// Where to write the per-user outcome CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_diversify(args: DiversifyArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let data = require(args.data, file.data, "data")?;
    let format = parse_format(&pick(args.format, file.format, "movielens_tab".into()))?;
    let model_path = require(args.model, file.model, "model")?;
    let k = pick(args.k, file.k, 10);
    if k == 0 {
        bail!("invalid --k: list length must be at least 1");
    }
    let metric = parse_metric(&pick(args.metric, file.metric, "euclidean".into()))?;
    let alpha = require(args.alpha, file.alpha, "alpha")?;
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        bail!("invalid --alpha {alpha}: must be between 0 and 1");
    }
    let discount = pick(args.discount, file.discount, 0.9);
    if !(discount > 0.0 && discount < 1.0) {
        bail!("invalid --discount {discount}: must be strictly between 0 and 1");
    }
    let exclude = !(args.include_observed || file.include_observed.unwrap_or(false));
    let out = pick(
        args.out,
        file.out_dir.map(|dir| dir.join("outcomes.csv")),
        PathBuf::from("outcomes.csv"),
    );

    let mut cfg = DiversifyConfig::new(alpha, metric, k);
    cfg.discount = discount;
    if let Some(cap) = args.max_iters.or(file.max_iters) {
        if cap == 0 {
            bail!("invalid --max-iters: iteration cap must be at least 1");
        }
        cfg.max_iters = cap;
    }

    let ds = load_dataset(&data, format)?;
    let model = load_model(&model_path)?;
    let lists = harness::build_lists(&model, &ds, k, exclude)?;
    let outcomes = diversify_all(&model, &ds, &lists, &cfg)?;

    let mut w = create_output(&out)?;
    write_outcomes_csv(&outcomes, &mut w)?;
    w.flush()?;

    let count = |status: DiversifyStatus| outcomes.iter().filter(|o| o.status == status).count();
    println!(
        "diversified {} users at alpha {}: {} already satisfied, {} satisfied, {} fixed point, {} capped",
        outcomes.len(),
        alpha,
        count(DiversifyStatus::AlreadySatisfied),
        count(DiversifyStatus::Satisfied),
        count(DiversifyStatus::FixedPoint),
        count(DiversifyStatus::MaxItersExceeded),
    );
    println!("outcomes: {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Optional TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ratings file; split into train (exclusion masks) and test (relevance truth).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input format: movielens_tab or csv_header.
    #[arg(long)]
    format: Option<String>,
    /// Fraction of each user's ratings held out as relevance truth.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Seed for the holdout split.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Model artifact produced by `divrec train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// List length to evaluate.
    #[arg(long)]
    k: Option<usize>,
    /// Distance metric: euclidean or cosine.
    #[arg(long)]
    metric: Option<String>,
    /// Comma-separated diversity floors to sweep (default 0.1 through 0.9).
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Multiplier applied to the rating floor when an iteration cannot swap.
    #[arg(long)]
    discount: Option<f64>,
    /// Iteration cap per user (default: 50 * k).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Keep already-rated items eligible instead of filtering them out.
    #[arg(long)]
    include_observed: bool,
    /// Directory receiving sweep.csv and exposure.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn run_sweep(args: SweepArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let data = require(args.data, file.data, "data")?;
    let format = parse_format(&pick(args.format, file.format, "movielens_tab".into()))?;
    let test_fraction = pick(args.test_fraction, file.test_fraction, 0.2);
    let split_seed = pick(args.split_seed, file.split_seed, 1);
    let model_path = require(args.model, file.model, "model")?;
    let k = pick(args.k, file.k, 10);
    if k == 0 {
        bail!("invalid --k: list length must be at least 1");
    }
    let metric = parse_metric(&pick(args.metric, file.metric, "euclidean".into()))?;

    let mut alphas = pick(args.alphas, file.alphas, harness::default_alpha_grid());
    if alphas.is_empty() {
        bail!("invalid --alphas: at least one value is required");
    }
    for &a in &alphas {
        if !(0.0..=1.0).contains(&a) || a.is_nan() {
            bail!("invalid --alphas: {a} is not between 0 and 1");
        }
    }
    if !alphas.is_sorted() {
        alphas.sort_by(|a, b| a.partial_cmp(b).expect("NaN rejected above"));
        eprintln!("note: --alphas were not ascending; sorted before execution");
    }

    let discount = pick(args.discount, file.discount, 0.9);
    if !(discount > 0.0 && discount < 1.0) {
        bail!("invalid --discount {discount}: must be strictly between 0 and 1");
    }
    let max_iters = match args.max_iters.or(file.max_iters) {
        Some(0) => bail!("invalid --max-iters: iteration cap must be at least 1"),
        Some(cap) => cap,
        None => 50 * k,
    };
    let exclude = !(args.include_observed || file.include_observed.unwrap_or(false));
    let out_dir = pick(args.out_dir, file.out_dir, PathBuf::from("."));

    let ds = load_dataset(&data, format)?;
    let split = split_dataset(&ds, test_fraction, split_seed)?;
    let model = load_model(&model_path)?;

    let output = harness::run_sweep(
        &model, &split, k, metric, &alphas, discount, max_iters, exclude,
    )?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let report_path = out_dir.join("sweep.csv");
    let exposure_path = out_dir.join("exposure.csv");
    let mut w = create_output(&report_path)?;
    harness::emit_report(&output.rows, &mut w)?;
    w.flush()?;
    let mut w = create_output(&exposure_path)?;
    harness::emit_exposure(&output.exposure, &mut w)?;
    w.flush()?;

    let first = output.rows.first().expect("alphas checked nonempty");
    let last = output.rows.last().expect("alphas checked nonempty");
    println!(
        "swept {} alphas at k={k}: overall nILLD {:.6} -> {:.6}, mean nDCG {:.6} -> {:.6}",
        output.rows.len(),
        first.overall_nilld,
        last.overall_nilld,
        first.mean_ndcg,
        last.mean_ndcg,
    );
    println!("report: {}", report_path.display());
    println!("exposure: {}", exposure_path.display());
    Ok(())
}
