//! Diversity post-processing: iteratively swap the least-diverse list member
//! for the most diversity-improving eligible item whose predicted rating
//! clears a floor, discounting the floor whenever no new item qualifies.
//!
//! The loop keeps going until the list's nILLD reaches the target alpha, or
//! one of two termination guards fires: a fixed point (the floor has dropped
//! below every eligible score, so further discounting cannot enlarge the
//! candidate pool, yet the best replacement is still the removed member) or
//! the iteration cap.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::RatingsDataset;
use crate::diversity::{
    illd_sum, max_illd_auto, nilld_from_sum, pair_dist, DistanceMetric, MaxIlldResult,
    DEFAULT_EXHAUSTIVE_BUDGET,
};
use crate::error::{Error, Result};
use crate::factorization::FactorModel;
use crate::ranking::RecommendationList;

#[derive(Debug, Clone, PartialEq)]
pub struct DiversifyConfig {
    /// Per-user nILLD target in [0,1].
    pub alpha: f64,
    pub metric: DistanceMetric,
    /// Floor multiplier applied when the best replacement is the removed
    /// member itself; strictly inside (0,1).
    pub discount: f64,
    /// Hard cap on loop iterations.
    pub max_iters: usize,
    /// List length this config applies to.
    pub k: usize,
}

impl DiversifyConfig {
    /// Defaults: discount 0.9, max_iters 50·k.
    pub fn new(alpha: f64, metric: DistanceMetric, k: usize) -> Self {
        DiversifyConfig {
            alpha,
            metric,
            discount: 0.9,
            max_iters: 50 * k.max(1),
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || self.alpha.is_nan() {
            return Err(Error::InvalidParam {
                name: "alpha",
                msg: format!("{} not in [0,1]", self.alpha),
            });
        }
        if !(self.discount > 0.0 && self.discount < 1.0) || self.discount.is_nan() {
            return Err(Error::InvalidParam {
                name: "discount",
                msg: format!("{} not strictly inside (0,1)", self.discount),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam {
                name: "max_iters",
                msg: "must be >= 1".into(),
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidParam {
                name: "k",
                msg: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiversifyStatus {
    /// The list met the target before any iteration ran.
    AlreadySatisfied,
    /// The loop raised the list to the target.
    Satisfied,
    /// Swap fixed point: the pool cannot grow and the best move is a no-op.
    FixedPoint,
    /// Iteration cap reached below the target.
    MaxItersExceeded,
}

impl std::fmt::Display for DiversifyStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DiversifyStatus::AlreadySatisfied => "already_satisfied",
            DiversifyStatus::Satisfied => "satisfied",
            DiversifyStatus::FixedPoint => "fixed_point",
            DiversifyStatus::MaxItersExceeded => "max_iters_exceeded",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversifyOutcome {
    pub user: u32,
    /// Final list, re-sorted by score descending; `reranked` is set iff at
    /// least one swap actually happened.
    pub final_list: RecommendationList,
    pub iterations: usize,
    pub swaps: usize,
    /// The ending rating floor.
    pub final_floor: f64,
    /// nILLD before the loop plus after every iteration; never decreasing.
    pub nilld_trace: Vec<f64>,
    pub status: DiversifyStatus,
}

impl DiversifyOutcome {
    pub fn final_nilld(&self) -> f64 {
        *self.nilld_trace.last().expect("trace holds the initial value")
    }
}

/// The member whose distance sum to the other members is smallest; ties break
/// by ascending item index.
pub fn least_diverse_member(items: &[u32], p: &DMatrix<f64>, metric: DistanceMetric) -> Result<u32> {
    if items.len() < 2 {
        return Err(Error::InvalidParam {
            name: "items",
            msg: format!("need at least 2 items, got {}", items.len()),
        });
    }
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(u32, f64)> = None;
    for &member in &sorted {
        let mut sum = 0.0;
        for &other in &sorted {
            if other != member {
                sum += pair_dist(metric, p, member, other)?;
            }
        }
        if best.is_none_or(|(_, s)| sum < s) {
            best = Some((member, sum));
        }
    }
    Ok(best.expect("nonempty items").0)
}

/// Among candidates whose predicted score clears the floor, the one with the
/// largest distance sum to `remaining`; ties break by ascending item index;
/// `None` when no candidate clears the floor.
pub fn best_replacement(
    remaining: &[u32],
    candidates: &[u32],
    p: &DMatrix<f64>,
    metric: DistanceMetric,
    scores: &[f64],
    floor: f64,
) -> Result<Option<u32>> {
    let mut rem = remaining.to_vec();
    rem.sort_unstable();
    let mut cand = candidates.to_vec();
    cand.sort_unstable();
    let mut best: Option<(u32, f64)> = None;
    for &c in &cand {
        let Some(&score) = scores.get(c as usize) else {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: c as usize,
                limit: scores.len(),
            });
        };
        if score < floor {
            continue;
        }
        let mut sum = 0.0;
        for &r in &rem {
            sum += pair_dist(metric, p, c, r)?;
        }
        if best.is_none_or(|(_, s)| sum > s) {
            best = Some((c, sum));
        }
    }
    Ok(best.map(|(c, _)| c))
}

/// Run the swap loop for one user given their full per-item score slice.
/// `observed` must be sorted ascending and is honored only when the input
/// list was built with observed-item exclusion. `scores[rec.items[i]]` is
/// expected to agree with `rec.scores[i]`; the floor is derived from the
/// score slice.
pub fn diversify_user_scored(
    scores: &[f64],
    observed: &[u32],
    rec: &RecommendationList,
    item_factors: &DMatrix<f64>,
    cfg: &DiversifyConfig,
    normalizer: &MaxIlldResult,
) -> Result<DiversifyOutcome> {
    cfg.validate()?;
    let m = item_factors.ncols();
    if scores.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} items",
            scores.len(),
            m
        )));
    }
    if rec.items.len() != cfg.k {
        return Err(Error::InvalidParam {
            name: "k",
            msg: format!("list has {} items but cfg.k={}", rec.items.len(), cfg.k),
        });
    }
    if normalizer.k() != cfg.k {
        return Err(Error::KMismatch {
            list_len: cfg.k,
            k: normalizer.k(),
        });
    }

    let mut eligible = vec![true; m];
    if rec.exclude_observed {
        for &o in observed {
            if (o as usize) < m {
                eligible[o as usize] = false;
            }
        }
    }

    let mut current = rec.items.clone();
    current.sort_unstable();
    let mut floor = f64::INFINITY;
    for &item in &current {
        if item as usize >= m {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: item as usize,
                limit: m,
            });
        }
        floor = floor.min(scores[item as usize]);
    }

    let mut nilld = nilld_from_sum(illd_sum(&current, item_factors, cfg.metric)?, normalizer);
    let mut trace = vec![nilld];
    let mut iterations = 0;
    let mut swaps = 0;

    // Distance sums from every item to the current `remaining` set. Rebuilt
    // only when `remaining` actually changes; consecutive discount-only
    // iterations reuse it.
    let mut cached_remaining: Vec<u32> = Vec::new();
    let mut sums_to_remaining: Vec<f64> = Vec::new();

    let status = loop {
        if nilld >= cfg.alpha {
            break if iterations == 0 {
                DiversifyStatus::AlreadySatisfied
            } else {
                DiversifyStatus::Satisfied
            };
        }
        if iterations == cfg.max_iters {
            break DiversifyStatus::MaxItersExceeded;
        }
        iterations += 1;

        let removed = least_diverse_member(&current, item_factors, cfg.metric)?;
        let remaining: Vec<u32> = current.iter().copied().filter(|&i| i != removed).collect();
        if remaining != cached_remaining {
            sums_to_remaining.clear();
            for e in 0..m as u32 {
                let mut sum = 0.0;
                for &r in &remaining {
                    sum += pair_dist(cfg.metric, item_factors, e, r)?;
                }
                sums_to_remaining.push(sum);
            }
            cached_remaining = remaining.clone();
        }

        // One ascending pass finds both the constrained argmax and the
        // unconstrained minimum eligible score (for the fixed-point guard).
        let mut best: Option<(u32, f64)> = None;
        let mut min_eligible_score: Option<f64> = None;
        for e in 0..m as u32 {
            if !eligible[e as usize] || remaining.binary_search(&e).is_ok() {
                continue;
            }
            let score = scores[e as usize];
            min_eligible_score = Some(match min_eligible_score {
                None => score,
                Some(t) => t.min(score),
            });
            if score < floor {
                continue;
            }
            let sum = sums_to_remaining[e as usize];
            if best.is_none_or(|(_, s)| sum > s) {
                best = Some((e, sum));
            }
        }

        // An empty feasible pool is treated like re-selecting the removed
        // member: re-insert and discount.
        let inserted = best.map_or(removed, |(e, _)| e);
        let reselected = inserted == removed;
        let at = current
            .iter()
            .position(|&i| i == removed)
            .expect("removed member was in the list");
        current.remove(at);
        let at = current.partition_point(|&i| i < inserted);
        current.insert(at, inserted);
        if !reselected {
            swaps += 1;
        }

        nilld = nilld_from_sum(illd_sum(&current, item_factors, cfg.metric)?, normalizer);
        trace.push(nilld);

        if reselected {
            match min_eligible_score {
                Some(min_score) if floor < min_score => break DiversifyStatus::FixedPoint,
                None => break DiversifyStatus::FixedPoint,
                _ => floor *= cfg.discount,
            }
        }
    };

    let final_list = if swaps == 0 {
        rec.clone()
    } else {
        let mut ordered: Vec<(u32, f64)> =
            current.iter().map(|&i| (i, scores[i as usize])).collect();
        ordered.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RecommendationList {
            user: rec.user,
            items: ordered.iter().map(|&(i, _)| i).collect(),
            scores: ordered.iter().map(|&(_, s)| s).collect(),
            reranked: true,
            exclude_observed: rec.exclude_observed,
        }
    };

    Ok(DiversifyOutcome {
        user: rec.user,
        final_list,
        iterations,
        swaps,
        final_floor: floor,
        nilld_trace: trace,
        status,
    })
}

/// Model-facing wrapper: derive the user's score slice and observed items,
/// then run the scored loop.
pub fn diversify_user(
    model: &FactorModel,
    train: &RatingsDataset,
    rec: &RecommendationList,
    cfg: &DiversifyConfig,
    normalizer: &MaxIlldResult,
) -> Result<DiversifyOutcome> {
    let scores = model.scores_for(rec.user as usize)?;
    let observed = if rec.exclude_observed {
        train.observed_items(rec.user)
    } else {
        Vec::new()
    };
    diversify_user_scored(&scores, &observed, rec, model.item_factors(), cfg, normalizer)
}

/// Diversify every list independently under one normalizer computed here
/// (exact within the default budget, greedy beyond it).
pub fn diversify_all(
    model: &FactorModel,
    train: &RatingsDataset,
    recs: &[RecommendationList],
    cfg: &DiversifyConfig,
) -> Result<Vec<DiversifyOutcome>> {
    let normalizer = max_illd_auto(
        model.item_factors(),
        cfg.k,
        cfg.metric,
        DEFAULT_EXHAUSTIVE_BUDGET,
    )?;
    diversify_all_with(model, train, recs, cfg, &normalizer)
}

/// `diversify_all` against a caller-supplied (typically cached) normalizer.
pub fn diversify_all_with(
    model: &FactorModel,
    train: &RatingsDataset,
    recs: &[RecommendationList],
    cfg: &DiversifyConfig,
    normalizer: &MaxIlldResult,
) -> Result<Vec<DiversifyOutcome>> {
    cfg.validate()?;
    if train.n_users() > model.n_users() || train.n_items() > model.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "train data is {}x{} but model covers {}x{}",
            train.n_users(),
            train.n_items(),
            model.n_users(),
            model.n_items()
        )));
    }
    let adjacency = train.items_by_user();
    recs.par_iter()
        .map(|rec| {
            let scores = model.scores_for(rec.user as usize)?;
            let observed: Vec<u32> = adjacency
                .get(rec.user as usize)
                .map(|row| row.iter().map(|&(item, _)| item).collect())
                .unwrap_or_default();
            diversify_user_scored(&scores, &observed, rec, model.item_factors(), cfg, normalizer)
        })
        .collect()
}

/// CSV serialization: `user,status,iterations,swaps,final_floor,final_nilld`.
pub fn write_outcomes_csv<W: Write>(outcomes: &[DiversifyOutcome], w: &mut W) -> Result<()> {
    writeln!(w, "user,status,iterations,swaps,final_floor,final_nilld")?;
    for o in outcomes {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            o.user,
            o.status,
            o.iterations,
            o.swaps,
            o.final_floor,
            o.final_nilld()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::{max_illd_exact, MaxIlldMethod};
    use crate::ranking::top_k_scored;

    fn line_items(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_vec(1, values.len(), values.to_vec())
    }

    fn exact_norm(p: &DMatrix<f64>, k: usize) -> MaxIlldResult {
        max_illd_exact(p, k, DistanceMetric::Euclidean, DEFAULT_EXHAUSTIVE_BUDGET).unwrap()
    }

    fn cfg(alpha: f64, k: usize) -> DiversifyConfig {
        DiversifyConfig::new(alpha, DistanceMetric::Euclidean, k)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.5, 2).validate().is_ok());
        assert!(DiversifyConfig { discount: 1.0, ..cfg(0.5, 2) }.validate().is_err());
        assert!(DiversifyConfig { discount: 0.0, ..cfg(0.5, 2) }.validate().is_err());
        assert!(DiversifyConfig { alpha: 1.5, ..cfg(0.5, 2) }.validate().is_err());
        assert!(DiversifyConfig { max_iters: 0, ..cfg(0.5, 2) }.validate().is_err());
        assert_eq!(cfg(0.5, 4).max_iters, 200);
    }

    #[test]
    fn least_diverse_hand_sums() {
        // values {0, 1, 1.1}: sums 2.1, 1.1, 1.2 -> middle item
        let p = line_items(&[0.0, 1.0, 1.1]);
        assert_eq!(least_diverse_member(&[0, 1, 2], &p, DistanceMetric::Euclidean).unwrap(), 1);
    }

    #[test]
    fn least_diverse_pair_ties_to_lower_index() {
        let p = line_items(&[0.0, 5.0]);
        assert_eq!(least_diverse_member(&[0, 1], &p, DistanceMetric::Euclidean).unwrap(), 0);
        assert_eq!(least_diverse_member(&[1, 0], &p, DistanceMetric::Euclidean).unwrap(), 0);
    }

    #[test]
    fn least_diverse_never_picks_the_outlier() {
        let p = line_items(&[0.0, 0.1, 0.2, 50.0]);
        let picked = least_diverse_member(&[0, 1, 2, 3], &p, DistanceMetric::Euclidean).unwrap();
        assert_ne!(picked, 3);
    }

    #[test]
    fn least_diverse_needs_two_items() {
        let p = line_items(&[0.0, 1.0]);
        assert!(least_diverse_member(&[0], &p, DistanceMetric::Euclidean).is_err());
    }

    #[test]
    fn best_replacement_respects_floor() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        // floor 4.9: only item 0 clears it
        let got = best_replacement(&[1], &[0, 2, 3], &p, DistanceMetric::Euclidean, &scores, 4.9)
            .unwrap();
        assert_eq!(got, Some(0));
        // floor below everything: farthest from {1} is item 3
        let got = best_replacement(&[1], &[0, 2, 3], &p, DistanceMetric::Euclidean, &scores, 0.0)
            .unwrap();
        assert_eq!(got, Some(3));
        // floor above everything: none
        let got = best_replacement(&[1], &[0, 2, 3], &p, DistanceMetric::Euclidean, &scores, 9.0)
            .unwrap();
        assert_eq!(got, None);
    }

    /// The 4-item reference trace: two discount iterations, then one swap.
    #[test]
    fn reference_trace_reproduces() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        let norm = exact_norm(&p, 2);
        assert_eq!(norm.value, 7.0);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();
        assert_eq!(rec.items, vec![0, 1]);

        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(0.5, 2), &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::Satisfied);
        assert_eq!(out.iterations, 3);
        assert_eq!(out.swaps, 1);
        assert_eq!(out.final_list.items, vec![1, 3]);
        assert_eq!(out.final_list.scores, vec![4.9, 4.0]);
        assert!(out.final_list.reranked);
        assert!((out.final_nilld() - 6.0 / 7.0).abs() < 1e-9);
        // floor discounted twice: 4.9 * 0.9 * 0.9
        assert!((out.final_floor - 3.969).abs() < 1e-12);
        assert_eq!(out.nilld_trace.len(), 4);
        assert!((out.nilld_trace[0] - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(out.nilld_trace[1], out.nilld_trace[0]);
        assert_eq!(out.nilld_trace[2], out.nilld_trace[0]);
    }

    /// Same fixture pushed to alpha=0.9: after reaching {1,3} one more swap
    /// replaces item 1 with item 0, landing on the normalizer subset.
    #[test]
    fn reference_trace_to_higher_alpha() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        let norm = exact_norm(&p, 2);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();

        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(0.9, 2), &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::Satisfied);
        assert_eq!(out.iterations, 4);
        assert_eq!(out.swaps, 2);
        assert_eq!(out.final_list.items, vec![0, 3]);
        assert_eq!(out.final_nilld(), 1.0);
        assert!((out.final_floor - 3.969).abs() < 1e-12);
    }

    #[test]
    fn already_satisfied_leaves_list_untouched() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        let norm = exact_norm(&p, 2);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();

        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(0.1, 2), &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::AlreadySatisfied);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.swaps, 0);
        assert_eq!(out.final_list, rec);
        assert!(!out.final_list.reranked);
        assert_eq!(out.nilld_trace.len(), 1);
    }

    /// With the only distance-improving candidate observed-and-excluded, the
    /// argmax ties back to the removed member, the floor discounts once, and
    /// the strict fixed-point guard fires on the next pass.
    #[test]
    fn fixed_point_when_pool_cannot_grow() {
        let p = line_items(&[0.0, 1.0, 2.0, 10.0]);
        let scores = [4.0, 4.0, 4.0, 4.0];
        let norm = exact_norm(&p, 2);
        assert_eq!(norm.subset, vec![0, 3]);
        let observed = [3u32];
        let rec = top_k_scored(0, &scores, &observed, 2, true).unwrap();
        assert_eq!(rec.items, vec![0, 1]);

        let out =
            diversify_user_scored(&scores, &observed, &rec, &p, &cfg(0.5, 2), &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::FixedPoint);
        assert_eq!(out.iterations, 2);
        assert_eq!(out.swaps, 0);
        assert_eq!(out.final_list.items, vec![0, 1]);
        assert!(!out.final_list.reranked);
        // one discount: 4 * 0.9
        assert!((out.final_floor - 3.6).abs() < 1e-12);
        // flat trace: the list never changed
        assert!(out.nilld_trace.iter().all(|&v| v == out.nilld_trace[0]));
        // the excluded item never entered the list
        assert!(!out.final_list.items.contains(&3));
    }

    /// A permanently infeasible score (negative, below any discounted floor)
    /// blocks the normalizer subset; the run must hit the iteration cap with
    /// a non-decreasing trace.
    #[test]
    fn iteration_cap_when_target_is_unreachable() {
        let p = line_items(&[0.0, 1.0, 2.0, 3.0, 10.0]);
        let scores = [-1.0, 4.0, 4.0, 4.0, 4.0];
        let norm = exact_norm(&p, 2);
        assert_eq!(norm.subset, vec![0, 4]);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();
        assert_eq!(rec.items, vec![1, 2]);

        let config = DiversifyConfig { max_iters: 10, ..cfg(1.0, 2) };
        let out = diversify_user_scored(&scores, &[], &rec, &p, &config, &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::MaxItersExceeded);
        assert_eq!(out.iterations, 10);
        assert!(out.final_nilld() < 1.0);
        for w in out.nilld_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // The best reachable pair under swaps is {1,4}.
        assert_eq!(out.final_list.items, vec![1, 4]);
    }

    #[test]
    fn floor_only_decreases_and_members_clear_it() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        let norm = exact_norm(&p, 2);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();
        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(0.9, 2), &norm).unwrap();
        for &item in &out.final_list.items {
            assert!(scores[item as usize] >= out.final_floor);
        }
        assert!(out.final_floor <= 4.9);
    }

    #[test]
    fn diversify_all_is_per_user_deterministic() {
        use crate::dataset::RatingsDataset;
        use crate::factorization::{FactorModel, TrainConfig};

        // Three identical users; d=1 scores equal the latent positions.
        let model = FactorModel::from_factors(
            DMatrix::from_vec(1, 3, vec![1.0, 1.0, 1.0]),
            line_items(&[0.0, 1.0, 3.0, 7.0]),
            TrainConfig::new(1),
        )
        .unwrap();
        let train = RatingsDataset::from_external(vec![
            (0, 0, 3.0),
            (0, 1, 3.0),
            (1, 2, 3.0),
            (1, 3, 3.0),
            (2, 0, 3.0),
        ])
        .unwrap();
        let recs: Vec<RecommendationList> = (0..3)
            .map(|u| {
                top_k_scored(u, &model.scores_for(u as usize).unwrap(), &[], 2, false).unwrap()
            })
            .collect();
        // top-2 everywhere: items {3, 2} (scores 7 and 3)
        assert!(recs.iter().all(|r| r.items == vec![3, 2]));

        let outcomes = diversify_all(&model, &train, &recs, &cfg(0.8, 2)).unwrap();
        assert_eq!(outcomes.len(), 3);
        for o in &outcomes {
            assert_eq!(o.status, outcomes[0].status);
            assert_eq!(o.iterations, outcomes[0].iterations);
            assert_eq!(o.swaps, outcomes[0].swaps);
            assert_eq!(o.nilld_trace, outcomes[0].nilld_trace);
            assert_eq!(o.final_list.items, outcomes[0].final_list.items);
            assert!(o.final_nilld() >= 0.8);
        }
    }

    #[test]
    fn outcome_csv_layout() {
        let p = line_items(&[0.0, 1.0, 1.1, 7.0]);
        let scores = [5.0, 4.9, 4.8, 4.0];
        let norm = exact_norm(&p, 2);
        let rec = top_k_scored(0, &scores, &[], 2, false).unwrap();
        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(0.5, 2), &norm).unwrap();

        let mut bytes = Vec::new();
        write_outcomes_csv(&[out], &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "user,status,iterations,swaps,final_floor,final_nilld");
        assert!(lines[1].starts_with("0,satisfied,3,1,"), "{}", lines[1]);
    }

    #[test]
    fn trivial_k1_list_is_vacuously_diverse() {
        // k=1 has no pairs: normalizer 0, nILLD convention 1, no iterations.
        let p = line_items(&[0.0, 1.0]);
        let norm = max_illd_exact(&p, 1, DistanceMetric::Euclidean, 100).unwrap();
        assert_eq!(norm.method, MaxIlldMethod::Exact);
        let scores = [3.0, 2.0];
        let rec = top_k_scored(0, &scores, &[], 1, false).unwrap();
        let out = diversify_user_scored(&scores, &[], &rec, &p, &cfg(1.0, 1), &norm).unwrap();
        assert_eq!(out.status, DiversifyStatus::AlreadySatisfied);
        assert_eq!(out.final_nilld(), 1.0);
    }
}
