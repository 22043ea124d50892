//! Latent-space diversity: pairwise distances, per-list distance sums, the
//! max-dispersion normalizer, normalized intra-list distance (nILLD), and the
//! alpha-diversity predicates.
//!
//! The normalizer is the maximum pairwise-distance sum over any k-subset of
//! item columns, the NP-hard max-sum dispersion problem. Small instances are
//! enumerated exactly; larger ones use a greedy build plus single-swap local
//! search, and the result records which method produced it.

use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ranking::RecommendationList;

/// Subset-count budget under which the exact normalizer is attempted.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Euclidean,
    Cosine,
}

impl DistanceMetric {
    /// Distance between two equal-length vectors. Euclidean is the L2 norm of
    /// the difference; cosine is 1 - cos(angle), clamped into [0,2] against
    /// floating-point overshoot. Cosine rejects zero vectors: a zero item
    /// column means an untrained item and should surface loudly.
    pub fn dist(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "distance between vectors of length {} and {}",
                x.len(),
                y.len()
            )));
        }
        match self {
            DistanceMetric::Euclidean => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(sq.sqrt())
            }
            DistanceMetric::Cosine => {
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::ZeroVector { item: None });
                }
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                Ok((1.0 - dot / (nx * ny)).clamp(0.0, 2.0))
            }
        }
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::InvalidParam {
                name: "metric",
                msg: format!("unknown metric `{other}` (expected euclidean or cosine)"),
            }),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceMetric::Euclidean => write!(f, "euclidean"),
            DistanceMetric::Cosine => write!(f, "cosine"),
        }
    }
}

/// Column `j` of an item-factor matrix as a slice (column-major storage).
pub(crate) fn item_col(p: &DMatrix<f64>, j: usize) -> &[f64] {
    let d = p.nrows();
    &p.as_slice()[j * d..(j + 1) * d]
}

/// Distance between item columns `a` and `b`, with the offending item index
/// attached when cosine hits a zero column.
pub(crate) fn pair_dist(metric: DistanceMetric, p: &DMatrix<f64>, a: u32, b: u32) -> Result<f64> {
    let m = p.ncols();
    for idx in [a, b] {
        if idx as usize >= m {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: idx as usize,
                limit: m,
            });
        }
    }
    metric
        .dist(item_col(p, a as usize), item_col(p, b as usize))
        .map_err(|e| match e {
            Error::ZeroVector { item: None } => {
                let a_zero = item_col(p, a as usize).iter().all(|&v| v == 0.0);
                Error::ZeroVector {
                    item: Some(if a_zero { a as usize } else { b as usize }),
                }
            }
            other => other,
        })
}

/// Sum of distances over all unordered pairs in `items`. Empty and singleton
/// lists give 0. Pairs are always visited in ascending-index order, so the
/// value is bitwise identical under any permutation of the input.
pub fn illd_sum(items: &[u32], p: &DMatrix<f64>, metric: DistanceMetric) -> Result<f64> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidData("duplicate items in list".into()));
    }
    let mut total = 0.0;
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            total += pair_dist(metric, p, sorted[i], sorted[j])?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxIlldMethod {
    Exact,
    GreedySwap,
}

impl std::fmt::Display for MaxIlldMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaxIlldMethod::Exact => write!(f, "exact"),
            MaxIlldMethod::GreedySwap => write!(f, "greedy_swap"),
        }
    }
}

/// A max-dispersion normalizer: the achieved pairwise-distance sum, the
/// subset that achieves it, and whether it is provably optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxIlldResult {
    pub value: f64,
    /// Ascending item indexes; its length is the k this normalizer serves.
    pub subset: Vec<u32>,
    pub method: MaxIlldMethod,
}

impl MaxIlldResult {
    pub fn k(&self) -> usize {
        self.subset.len()
    }
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k > m {
        return Err(Error::InvalidParam {
            name: "k",
            msg: format!("k={k} exceeds item count {m}"),
        });
    }
    Ok(())
}

fn trivial_normalizer(k: usize, method: MaxIlldMethod) -> MaxIlldResult {
    // Fewer than two items means no pairs: value 0, lexicographically
    // smallest subset.
    MaxIlldResult {
        value: 0.0,
        subset: (0..k as u32).collect(),
        method,
    }
}

/// Number of k-subsets of an m-set; saturates (still enormous) only if the
/// running product overflows u128, which keeps budget comparisons correct.
fn binomial(m: usize, k: usize) -> u128 {
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // Exact at every step: a product of i consecutive integers is
        // divisible by i.
        acc = acc.saturating_mul((m - k + i) as u128) / i as u128;
    }
    acc
}

/// Exhaustive max-dispersion search in lexicographic subset order; ties keep
/// the first (lexicographically smallest) subset. Refuses instances with more
/// than `budget` subsets so callers can fall back to the greedy search.
pub fn max_illd_exact(
    p: &DMatrix<f64>,
    k: usize,
    metric: DistanceMetric,
    budget: u64,
) -> Result<MaxIlldResult> {
    let m = p.ncols();
    check_k(k, m)?;
    if k < 2 {
        return Ok(trivial_normalizer(k, MaxIlldMethod::Exact));
    }
    let subsets = binomial(m, k);
    if subsets > budget as u128 {
        return Err(Error::BudgetExceeded {
            items: m,
            k,
            subsets,
            budget,
        });
    }

    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<u32> = vec![0; k];
    let mut best_value = -1.0;
    let mut best_subset: Vec<u32> = Vec::new();
    loop {
        for (slot, &i) in buf.iter_mut().zip(&idx) {
            *slot = i as u32;
        }
        let value = illd_sum(&buf, p, metric)?;
        if value > best_value {
            best_value = value;
            best_subset = buf.clone();
        }
        // Advance to the next combination in lexicographic order.
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(MaxIlldResult {
                    value: best_value,
                    subset: best_subset,
                    method: MaxIlldMethod::Exact,
                });
            }
            pos -= 1;
            if idx[pos] != pos + m - k {
                break;
            }
        }
        idx[pos] += 1;
        for i in (pos + 1)..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

const MAX_SWAP_PASSES: usize = 1_000;

/// Greedy max-dispersion: seed with the exact farthest pair, grow by the item
/// with the largest distance sum to the chosen set, then best-improvement
/// single swaps until no swap helps. All ties break by ascending item index.
/// On metric distances this construction stays within a factor 2 of optimal.
pub fn max_illd_greedy(p: &DMatrix<f64>, k: usize, metric: DistanceMetric) -> Result<MaxIlldResult> {
    let m = p.ncols();
    check_k(k, m)?;
    if k < 2 {
        return Ok(trivial_normalizer(k, MaxIlldMethod::GreedySwap));
    }

    let mut best_pair = (0u32, 1u32);
    let mut best_pair_dist = -1.0;
    for a in 0..m as u32 {
        for b in (a + 1)..m as u32 {
            let dv = pair_dist(metric, p, a, b)?;
            if dv > best_pair_dist {
                best_pair_dist = dv;
                best_pair = (a, b);
            }
        }
    }

    let mut chosen = vec![best_pair.0, best_pair.1];
    let mut in_chosen = vec![false; m];
    in_chosen[best_pair.0 as usize] = true;
    in_chosen[best_pair.1 as usize] = true;
    // sum_to_chosen[e] = sum of distances from e to every chosen item
    // (self-distance is 0, so for members this is their own contribution).
    let mut sum_to_chosen: Vec<f64> = Vec::with_capacity(m);
    for e in 0..m as u32 {
        sum_to_chosen
            .push(pair_dist(metric, p, e, best_pair.0)? + pair_dist(metric, p, e, best_pair.1)?);
    }

    while chosen.len() < k {
        let mut best_e: Option<u32> = None;
        let mut best_v = f64::NEG_INFINITY;
        for e in 0..m as u32 {
            if in_chosen[e as usize] {
                continue;
            }
            if sum_to_chosen[e as usize] > best_v {
                best_v = sum_to_chosen[e as usize];
                best_e = Some(e);
            }
        }
        let e = best_e.expect("k <= m leaves a candidate");
        let at = chosen.partition_point(|&c| c < e);
        chosen.insert(at, e);
        in_chosen[e as usize] = true;
        for f in 0..m as u32 {
            sum_to_chosen[f as usize] += pair_dist(metric, p, f, e)?;
        }
    }

    let mut current = illd_sum(&chosen, p, metric)?;
    for _ in 0..MAX_SWAP_PASSES {
        // Best-improvement scan over (member out, candidate in) pairs, in
        // ascending index order on both sides so ties keep the smallest.
        let mut best_gain = 0.0;
        let mut best_swap: Option<(u32, u32)> = None;
        for &out in &chosen {
            for inn in 0..m as u32 {
                if in_chosen[inn as usize] {
                    continue;
                }
                let gain = sum_to_chosen[inn as usize]
                    - pair_dist(metric, p, out, inn)?
                    - sum_to_chosen[out as usize];
                if gain > best_gain {
                    best_gain = gain;
                    best_swap = Some((out, inn));
                }
            }
        }
        let Some((out, inn)) = best_swap else { break };
        let tol = 1e-12 * current.abs().max(1.0);
        if best_gain <= tol {
            break;
        }
        apply_swap(&mut chosen, &mut in_chosen, out, inn);
        for f in 0..m as u32 {
            sum_to_chosen[f as usize] +=
                pair_dist(metric, p, f, inn)? - pair_dist(metric, p, f, out)?;
        }
        let new_value = illd_sum(&chosen, p, metric)?;
        if new_value <= current {
            // The incremental table promised an improvement that exact
            // recomputation does not confirm; undo and stop.
            apply_swap(&mut chosen, &mut in_chosen, inn, out);
            for f in 0..m as u32 {
                sum_to_chosen[f as usize] +=
                    pair_dist(metric, p, f, out)? - pair_dist(metric, p, f, inn)?;
            }
            break;
        }
        current = new_value;
    }

    Ok(MaxIlldResult {
        value: current,
        subset: chosen,
        method: MaxIlldMethod::GreedySwap,
    })
}

fn apply_swap(chosen: &mut Vec<u32>, in_chosen: &mut [bool], out: u32, inn: u32) {
    let pos = chosen.binary_search(&out).expect("member present");
    chosen.remove(pos);
    let at = chosen.partition_point(|&c| c < inn);
    chosen.insert(at, inn);
    in_chosen[out as usize] = false;
    in_chosen[inn as usize] = true;
}

/// Exact normalizer when the subset count fits the budget, greedy otherwise.
pub fn max_illd_auto(
    p: &DMatrix<f64>,
    k: usize,
    metric: DistanceMetric,
    budget: u64,
) -> Result<MaxIlldResult> {
    match max_illd_exact(p, k, metric, budget) {
        Ok(r) => Ok(r),
        Err(Error::BudgetExceeded { .. }) => max_illd_greedy(p, k, metric),
        Err(other) => Err(other),
    }
}

fn normalize_sum(sum: f64, normalizer: &MaxIlldResult) -> (f64, bool) {
    if normalizer.value == 0.0 {
        // No k-subset has any spread, so no list can be less diverse than the
        // best one: the constraint is vacuously met.
        return (1.0, false);
    }
    let ratio = sum / normalizer.value;
    (ratio.min(1.0), ratio > 1.0)
}

pub(crate) fn nilld_from_sum(sum: f64, normalizer: &MaxIlldResult) -> f64 {
    normalize_sum(sum, normalizer).0
}

/// Normalized intra-list latent distance for one list: the list's pairwise
/// distance sum over the normalizer, clamped at 1 (a greedy normalizer may
/// underestimate the true maximum).
pub fn nilld_user(
    rec: &RecommendationList,
    p: &DMatrix<f64>,
    metric: DistanceMetric,
    normalizer: &MaxIlldResult,
) -> Result<f64> {
    if rec.items.len() != normalizer.k() {
        return Err(Error::KMismatch {
            list_len: rec.items.len(),
            k: normalizer.k(),
        });
    }
    let sum = illd_sum(&rec.items, p, metric)?;
    Ok(normalize_sum(sum, normalizer).0)
}

/// Per-user nILLD for every list plus their mean and how often the clamp at 1
/// fired (only possible with a non-exact normalizer).
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub k: usize,
    pub metric: DistanceMetric,
    pub max_illd: MaxIlldResult,
    /// One value per input list, in input order.
    pub per_user_nilld: Vec<f64>,
    pub overall_nilld: f64,
    pub clamp_count: usize,
}

pub fn nilld_overall(
    recs: &[RecommendationList],
    p: &DMatrix<f64>,
    metric: DistanceMetric,
    normalizer: &MaxIlldResult,
) -> Result<DiversityReport> {
    if recs.is_empty() {
        return Err(Error::EmptyInput("no recommendation lists".into()));
    }
    let mut per_user_nilld = Vec::with_capacity(recs.len());
    let mut clamp_count = 0;
    for rec in recs {
        if rec.items.len() != normalizer.k() {
            return Err(Error::KMismatch {
                list_len: rec.items.len(),
                k: normalizer.k(),
            });
        }
        let sum = illd_sum(&rec.items, p, metric)?;
        let (value, clamped) = normalize_sum(sum, normalizer);
        per_user_nilld.push(value);
        clamp_count += usize::from(clamped);
    }
    let overall_nilld = per_user_nilld.iter().sum::<f64>() / per_user_nilld.len() as f64;
    Ok(DiversityReport {
        k: normalizer.k(),
        metric,
        max_illd: normalizer.clone(),
        per_user_nilld,
        overall_nilld,
        clamp_count,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::InvalidParam {
            name: "alpha",
            msg: format!("{alpha} not in [0,1]"),
        });
    }
    Ok(())
}

/// Overall alpha-diversity: mean nILLD at least alpha.
pub fn satisfies_alpha(report: &DiversityReport, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    Ok(report.overall_nilld >= alpha)
}

/// Individual alpha-diversity: every per-user nILLD at least alpha. Returns
/// the verdict and the positions (list order) of the violating users.
pub fn satisfies_individual_alpha(report: &DiversityReport, alpha: f64) -> Result<(bool, Vec<u32>)> {
    check_alpha(alpha)?;
    let violators: Vec<u32> = report
        .per_user_nilld
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < alpha)
        .map(|(i, _)| i as u32)
        .collect();
    Ok((violators.is_empty(), violators))
}

/// CSV serialization: normalizer metadata as `#` sidecar lines, one
/// `user,nilld` row per list, then a summary row.
pub fn write_report_csv<W: Write>(report: &DiversityReport, w: &mut W) -> Result<()> {
    writeln!(w, "# normalizer_value={}", report.max_illd.value)?;
    writeln!(w, "# normalizer_method={}", report.max_illd.method)?;
    let subset: Vec<String> = report.max_illd.subset.iter().map(|i| i.to_string()).collect();
    writeln!(w, "# normalizer_subset={}", subset.join(";"))?;
    writeln!(w, "# metric={}", report.metric)?;
    writeln!(w, "# k={}", report.k)?;
    writeln!(w, "user,nilld")?;
    for (i, v) in report.per_user_nilld.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    writeln!(w, "overall,{}", report.overall_nilld)?;
    Ok(())
}
