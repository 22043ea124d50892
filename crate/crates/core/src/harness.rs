//! Experiment harness: baseline relevance/diversity measurement and
//! alpha-sensitivity sweeps over the post-processing loop, reported as CSV.
//!
//! A sweep builds the top-k lists once, then for each alpha re-runs the
//! diversity post-processing on fresh copies of those lists and re-evaluates
//! relevance against held-out truth. Relevance is always measured against the
//! held-out ratings, never against predicted scores: the trade-off of
//! interest is real relevance lost, not model-score lost.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{RatingsDataset, SplitPair};
use crate::diversity::{
    max_illd_auto, nilld_overall, DistanceMetric, DiversityReport, DEFAULT_EXHAUSTIVE_BUDGET,
};
use crate::error::{Error, Result};
use crate::factorization::FactorModel;
use crate::postprocess::{diversify_all_with, DiversifyConfig, DiversifyOutcome};
use crate::ranking::{
    hit_rate_at_k, ndcg_at_k, precision_at_k, recall_at_k, top_k_scored, RecommendationList,
    DEFAULT_RELEVANCE_THRESHOLD,
};

pub const SWEEP_CSV_HEADER: &str = "alpha,mean_ndcg,mean_precision,mean_recall,mean_hit_rate,overall_nilld,min_user_nilld,max_user_nilld,std_user_nilld,fraction_satisfied,mean_swaps,mean_iterations,clamp_count";
pub const EXPOSURE_CSV_HEADER: &str = "item,baseline_count,postprocessed_count";

/// One aggregated sweep point. Means over users that have no held-out truth
/// to evaluate (nDCG, recall, hit rate) skip those users; precision divides
/// by k for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_ndcg: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_hit_rate: f64,
    pub overall_nilld: f64,
    pub min_user_nilld: f64,
    pub max_user_nilld: f64,
    pub std_user_nilld: f64,
    pub fraction_satisfied: f64,
    pub mean_swaps: f64,
    pub mean_iterations: f64,
    pub clamp_count: usize,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.alpha,
            self.mean_ndcg,
            self.mean_precision,
            self.mean_recall,
            self.mean_hit_rate,
            self.overall_nilld,
            self.min_user_nilld,
            self.max_user_nilld,
            self.std_user_nilld,
            self.fraction_satisfied,
            self.mean_swaps,
            self.mean_iterations,
            self.clamp_count
        )
    }
}

/// How many lists an item appears in, before and after post-processing (the
/// post column reflects the largest swept alpha, the most aggressive
/// intervention). Every item id gets a row, zeros included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposureRow {
    pub item: u32,
    pub baseline_count: usize,
    pub postprocessed_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// One row per alpha, in input order.
    pub rows: Vec<SweepRow>,
    pub exposure: Vec<ExposureRow>,
}

/// The default sensitivity grid 0.1, 0.2, ..., 0.9.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Top-k lists for every user in the training split, in user order.
pub fn build_lists(
    model: &FactorModel,
    train: &RatingsDataset,
    k: usize,
    exclude_observed: bool,
) -> Result<Vec<RecommendationList>> {
    if train.n_users() > model.n_users() || train.n_items() > model.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "train data is {}x{} but model covers {}x{}",
            train.n_users(),
            train.n_items(),
            model.n_users(),
            model.n_items()
        )));
    }
    if train.n_users() == 0 {
        return Err(Error::EmptyInput("no users to recommend for".into()));
    }
    let adjacency = train.items_by_user();
    (0..train.n_users() as u32)
        .into_par_iter()
        .map(|user| {
            let scores = model.scores_for(user as usize)?;
            let observed: Vec<u32> = adjacency[user as usize]
                .iter()
                .map(|&(item, _)| item)
                .collect();
            top_k_scored(user, &scores, &observed, k, exclude_observed)
        })
        .collect()
}

/// Held-out ratings keyed by item, one map per user index. Test rows for
/// users without a recommendation list are ignored.
pub fn truth_by_user(test: &RatingsDataset, n_users: usize) -> Vec<HashMap<u32, f64>> {
    let mut out = vec![HashMap::new(); n_users];
    for r in test.ratings() {
        if (r.user as usize) < n_users {
            out[r.user as usize].insert(r.item, r.value);
        }
    }
    out
}

fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn aggregate_row(
    alpha: f64,
    lists: &[RecommendationList],
    truth: &[HashMap<u32, f64>],
    report: &DiversityReport,
    k: usize,
    outcomes: Option<&[DiversifyOutcome]>,
) -> SweepRow {
    let mut ndcgs = Vec::new();
    let mut recalls = Vec::new();
    let mut hits = Vec::new();
    let mut precision_sum = 0.0;
    for rec in lists {
        let t = &truth[rec.user as usize];
        if let Some(v) = ndcg_at_k(rec, t, k) {
            ndcgs.push(v);
        }
        precision_sum += precision_at_k(rec, t, k, DEFAULT_RELEVANCE_THRESHOLD);
        if let Some(v) = recall_at_k(rec, t, k, DEFAULT_RELEVANCE_THRESHOLD) {
            recalls.push(v);
        }
        if let Some(h) = hit_rate_at_k(rec, t, k, DEFAULT_RELEVANCE_THRESHOLD) {
            hits.push(f64::from(u8::from(h)));
        }
    }

    let nillds = &report.per_user_nilld;
    let n = nillds.len() as f64;
    let min_user_nilld = nillds.iter().copied().fold(f64::INFINITY, f64::min);
    let max_user_nilld = nillds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let variance = nillds
        .iter()
        .map(|v| (v - report.overall_nilld).powi(2))
        .sum::<f64>()
        / n;
    let satisfied = nillds.iter().filter(|&&v| v >= alpha).count();

    let (mean_swaps, mean_iterations) = match outcomes {
        Some(out) => (
            out.iter().map(|o| o.swaps as f64).sum::<f64>() / out.len() as f64,
            out.iter().map(|o| o.iterations as f64).sum::<f64>() / out.len() as f64,
        ),
        None => (0.0, 0.0),
    };

    SweepRow {
        alpha,
        mean_ndcg: mean_of(&ndcgs),
        mean_precision: precision_sum / lists.len() as f64,
        mean_recall: mean_of(&recalls),
        mean_hit_rate: mean_of(&hits),
        overall_nilld: report.overall_nilld,
        min_user_nilld,
        max_user_nilld,
        std_user_nilld: variance.sqrt(),
        fraction_satisfied: satisfied as f64 / n,
        mean_swaps,
        mean_iterations,
        clamp_count: report.clamp_count,
    }
}

/// Baseline measurement: top-k lists with no post-processing, reported as an
/// alpha = 0 row.
pub fn run_baseline(
    model: &FactorModel,
    split: &SplitPair,
    k: usize,
    metric: DistanceMetric,
    exclude_observed: bool,
) -> Result<SweepRow> {
    let lists = build_lists(model, &split.train, k, exclude_observed)?;
    let normalizer = max_illd_auto(model.item_factors(), k, metric, DEFAULT_EXHAUSTIVE_BUDGET)?;
    let report = nilld_overall(&lists, model.item_factors(), metric, &normalizer)?;
    let truth = truth_by_user(&split.test, lists.len());
    Ok(aggregate_row(0.0, &lists, &truth, &report, k, None))
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("no alphas to sweep".into()));
    }
    for &a in alphas {
        if !(0.0..=1.0).contains(&a) || a.is_nan() {
            return Err(Error::InvalidParam {
                name: "alphas",
                msg: format!("{a} not in [0,1]"),
            });
        }
    }
    if alphas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParam {
            name: "alphas",
            msg: "must be sorted ascending".into(),
        });
    }
    Ok(())
}

/// Alpha-sensitivity sweep: one row per alpha, each produced by diversifying
/// fresh copies of the shared baseline lists and re-evaluating relevance on
/// the post-processed lists. Sweep points run in input order, so rows are
/// deterministic and ordered.
pub fn run_sweep(
    model: &FactorModel,
    split: &SplitPair,
    k: usize,
    metric: DistanceMetric,
    alphas: &[f64],
    discount: f64,
    max_iters: usize,
    exclude_observed: bool,
) -> Result<SweepOutput> {
    check_alphas(alphas)?;
    let lists = build_lists(model, &split.train, k, exclude_observed)?;
    let normalizer = max_illd_auto(model.item_factors(), k, metric, DEFAULT_EXHAUSTIVE_BUDGET)?;
    let truth = truth_by_user(&split.test, lists.len());

    let mut rows = Vec::with_capacity(alphas.len());
    let mut last_post = lists.clone();
    for &alpha in alphas {
        let cfg = DiversifyConfig {
            alpha,
            metric,
            discount,
            max_iters,
            k,
        };
        let outcomes = diversify_all_with(model, &split.train, &lists, &cfg, &normalizer)?;
        let post: Vec<RecommendationList> =
            outcomes.iter().map(|o| o.final_list.clone()).collect();
        let report = nilld_overall(&post, model.item_factors(), metric, &normalizer)?;
        rows.push(aggregate_row(alpha, &post, &truth, &report, k, Some(&outcomes)));
        last_post = post;
    }

    let exposure = exposure_rows(model.n_items(), &lists, &last_post);
    Ok(SweepOutput { rows, exposure })
}

fn exposure_rows(
    n_items: usize,
    baseline: &[RecommendationList],
    post: &[RecommendationList],
) -> Vec<ExposureRow> {
    let mut base_counts = vec![0usize; n_items];
    let mut post_counts = vec![0usize; n_items];
    for rec in baseline {
        for &item in &rec.items {
            base_counts[item as usize] += 1;
        }
    }
    for rec in post {
        for &item in &rec.items {
            post_counts[item as usize] += 1;
        }
    }
    (0..n_items)
        .map(|i| ExposureRow {
            item: i as u32,
            baseline_count: base_counts[i],
            postprocessed_count: post_counts[i],
        })
        .collect()
}

/// Sweep CSV: fixed header plus one line per row; deterministic bytes.
pub fn emit_report<W: Write>(rows: &[SweepRow], w: &mut W) -> Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Exposure CSV: fixed header plus one line per item.
pub fn emit_exposure<W: Write>(rows: &[ExposureRow], w: &mut W) -> Result<()> {
    writeln!(w, "{EXPOSURE_CSV_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{}",
            row.item, row.baseline_count, row.postprocessed_count
        )?;
    }
    Ok(())
}
