//! Top-k list construction and relevance metrics (nDCG, precision, recall,
//! hit rate) against held-out truth.
//!
//! Metrics that have no defined value for a user (empty truth, or no relevant
//! truth items) return `None` so aggregation can skip the user instead of
//! diluting the mean with fake zeros.

use std::collections::HashMap;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::factorization::FactorModel;

/// Truth ratings at or above this count as relevant for precision/recall/hits.
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 4.0;

/// An ordered per-user recommendation list with aligned predicted scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user: u32,
    /// k distinct item indexes, highest predicted score first at construction.
    pub items: Vec<u32>,
    pub scores: Vec<f64>,
    /// Set once post-processing has replaced at least one member.
    pub reranked: bool,
    /// Whether train-observed items were excluded when this list was built;
    /// post-processing keeps honoring the same policy.
    pub exclude_observed: bool,
}

/// Build a top-k list directly from a score slice. `observed` must be sorted
/// ascending and is only consulted when `exclude_observed` is set. Sorting is
/// by score descending with ties broken by ascending item index.
pub fn top_k_scored(
    user: u32,
    scores: &[f64],
    observed: &[u32],
    k: usize,
    exclude_observed: bool,
) -> Result<RecommendationList> {
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            msg: "k must be >= 1".into(),
        });
    }
    let mut candidates: Vec<(u32, f64)> = Vec::with_capacity(scores.len());
    for (j, &score) in scores.iter().enumerate() {
        let j = j as u32;
        if exclude_observed && observed.binary_search(&j).is_ok() {
            continue;
        }
        candidates.push((j, score));
    }
    if candidates.len() < k {
        return Err(Error::InvalidParam {
            name: "k",
            msg: format!(
                "k={k} exceeds the {} eligible items for user {user}",
                candidates.len()
            ),
        });
    }
    candidates.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.truncate(k);
    Ok(RecommendationList {
        user,
        items: candidates.iter().map(|&(j, _)| j).collect(),
        scores: candidates.iter().map(|&(_, s)| s).collect(),
        reranked: false,
        exclude_observed,
    })
}

/// The k highest-scored eligible items for one user under the model.
pub fn top_k(
    model: &FactorModel,
    train: &RatingsDataset,
    user: u32,
    k: usize,
    exclude_observed: bool,
) -> Result<RecommendationList> {
    if train.n_users() > model.n_users() || train.n_items() > model.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "train data is {}x{} but model covers {}x{}",
            train.n_users(),
            train.n_items(),
            model.n_users(),
            model.n_items()
        )));
    }
    let scores = model.scores_for(user as usize)?;
    let observed = if exclude_observed {
        train.observed_items(user)
    } else {
        Vec::new()
    };
    top_k_scored(user, &scores, &observed, k, exclude_observed)
}

/// Normalized discounted cumulative gain over the first k ranks. Gains are
/// raw truth ratings (items missing from truth gain 0); discounts are
/// log2(rank+1). `None` when the user has no truth ratings at all.
pub fn ndcg_at_k(rec: &RecommendationList, truth: &HashMap<u32, f64>, k: usize) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let depth = k.min(rec.items.len());
    let mut dcg = 0.0;
    for (rank, item) in rec.items[..depth].iter().enumerate() {
        let gain = truth.get(item).copied().unwrap_or(0.0);
        dcg += gain / ((rank + 2) as f64).log2();
    }
    let mut ideal: Vec<f64> = truth.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.total_cmp(a));
    ideal.truncate(k);
    let mut idcg = 0.0;
    for (rank, gain) in ideal.iter().enumerate() {
        idcg += gain / ((rank + 2) as f64).log2();
    }
    if idcg == 0.0 {
        return None;
    }
    Some(dcg / idcg)
}

/// Fraction of the first k recommendations whose truth rating clears the
/// relevance threshold. Items absent from truth count as irrelevant.
pub fn precision_at_k(
    rec: &RecommendationList,
    truth: &HashMap<u32, f64>,
    k: usize,
    relevance_threshold: f64,
) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let depth = k.min(rec.items.len());
    let hits = rec.items[..depth]
        .iter()
        .filter(|item| truth.get(item).is_some_and(|&r| r >= relevance_threshold))
        .count();
    hits as f64 / k as f64
}

/// Recommended-and-relevant over total relevant in truth; `None` when the
/// user has no relevant truth items.
pub fn recall_at_k(
    rec: &RecommendationList,
    truth: &HashMap<u32, f64>,
    k: usize,
    relevance_threshold: f64,
) -> Option<f64> {
    let relevant_total = truth.values().filter(|&&r| r >= relevance_threshold).count();
    if relevant_total == 0 {
        return None;
    }
    let depth = k.min(rec.items.len());
    let hits = rec.items[..depth]
        .iter()
        .filter(|item| truth.get(item).is_some_and(|&r| r >= relevance_threshold))
        .count();
    Some(hits as f64 / relevant_total as f64)
}

/// Whether at least one relevant item made the first k ranks; `None` when the
/// user has no relevant truth items.
pub fn hit_rate_at_k(
    rec: &RecommendationList,
    truth: &HashMap<u32, f64>,
    k: usize,
    relevance_threshold: f64,
) -> Option<bool> {
    recall_at_k(rec, truth, k, relevance_threshold).map(|r| r > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingsDataset;
    use crate::factorization::{FactorModel, TrainConfig};
    use nalgebra::DMatrix;

    fn list(items: &[u32]) -> RecommendationList {
        RecommendationList {
            user: 0,
            items: items.to_vec(),
            scores: vec![0.0; items.len()],
            reranked: false,
            exclude_observed: false,
        }
    }

    fn truth(pairs: &[(u32, f64)]) -> HashMap<u32, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn top_k_sorts_by_score() {
        let rec = top_k_scored(0, &[0.1, 0.9, 0.5], &[], 2, false).unwrap();
        assert_eq!(rec.items, vec![1, 2]);
        assert_eq!(rec.scores, vec![0.9, 0.5]);
        assert!(!rec.reranked);
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        let rec = top_k_scored(0, &[0.4, 0.4, 0.4], &[], 2, false).unwrap();
        assert_eq!(rec.items, vec![0, 1]);
    }

    #[test]
    fn top_k_exclusion_removes_observed() {
        let rec = top_k_scored(0, &[0.1, 0.9, 0.5], &[1], 2, true).unwrap();
        assert_eq!(rec.items, vec![2, 0]);
    }

    #[test]
    fn top_k_rejects_oversized_k() {
        assert!(top_k_scored(0, &[0.1, 0.9], &[], 3, false).is_err());
        assert!(top_k_scored(0, &[0.1, 0.9, 0.5], &[0, 1], 2, true).is_err());
        assert!(top_k_scored(0, &[0.1], &[], 0, false).is_err());
    }

    #[test]
    fn top_k_through_model_respects_exclusion() {
        // Items intern as 10->0, 11->1, 12->2; user 2 (dense 1) rated item 11.
        let ds = RatingsDataset::from_external(vec![
            (1, 10, 3.0),
            (1, 11, 4.0),
            (1, 12, 5.0),
            (2, 11, 2.0),
        ])
        .unwrap();
        let model = FactorModel::from_factors(
            DMatrix::from_vec(1, 2, vec![1.0, 1.0]),
            DMatrix::from_vec(1, 3, vec![0.1, 0.9, 0.5]),
            TrainConfig::new(1),
        )
        .unwrap();
        let rec = top_k(&model, &ds, 1, 2, true).unwrap();
        assert_eq!(rec.items, vec![2, 0]);
        assert!(rec.exclude_observed);

        let unfiltered = top_k(&model, &ds, 1, 3, false).unwrap();
        assert_eq!(unfiltered.items, vec![1, 2, 0]);
    }

    #[test]
    fn ndcg_ideal_order_is_exactly_one() {
        let t = truth(&[(7, 5.0), (3, 4.0), (9, 2.0)]);
        let rec = list(&[7, 3, 9]);
        assert_eq!(ndcg_at_k(&rec, &t, 3), Some(1.0));
    }

    #[test]
    fn ndcg_reversed_pair_hand_value() {
        // DCG = 2/log2(2) + 3/log2(3); IDCG = 3 + 2/log2(3); ratio ~ 0.9134
        let t = truth(&[(0, 3.0), (1, 2.0)]);
        let rec = list(&[1, 0]);
        let v = ndcg_at_k(&rec, &t, 2).unwrap();
        assert!((v - 0.9134).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn ndcg_no_overlap_is_zero() {
        let t = truth(&[(5, 4.0)]);
        let rec = list(&[0, 1]);
        assert_eq!(ndcg_at_k(&rec, &t, 2), Some(0.0));
    }

    #[test]
    fn ndcg_empty_truth_is_skip() {
        let rec = list(&[0, 1]);
        assert_eq!(ndcg_at_k(&rec, &HashMap::new(), 2), None);
    }

    #[test]
    fn precision_hand_values() {
        let t = truth(&[(0, 5.0), (1, 3.0)]);
        let rec = list(&[0, 1]);
        assert_eq!(precision_at_k(&rec, &t, 2, 4.0), 0.5);

        let all = truth(&[(0, 5.0), (1, 4.0)]);
        assert_eq!(precision_at_k(&rec, &all, 2, 4.0), 1.0);
        assert_eq!(precision_at_k(&rec, &HashMap::new(), 2, 4.0), 0.0);
    }

    #[test]
    fn recall_hand_values() {
        let one = truth(&[(0, 5.0)]);
        assert_eq!(recall_at_k(&list(&[0, 1]), &one, 2, 4.0), Some(1.0));

        let four = truth(&[(0, 5.0), (7, 5.0), (8, 4.0), (9, 4.5)]);
        assert_eq!(recall_at_k(&list(&[0, 1]), &four, 2, 4.0), Some(0.25));

        let three = truth(&[(7, 5.0), (8, 4.0), (9, 4.5)]);
        assert_eq!(recall_at_k(&list(&[0, 1]), &three, 2, 4.0), Some(0.0));

        let none_relevant = truth(&[(0, 2.0)]);
        assert_eq!(recall_at_k(&list(&[0, 1]), &none_relevant, 2, 4.0), None);
    }

    #[test]
    fn hit_rate_hand_values() {
        let t = truth(&[(1, 5.0)]);
        assert_eq!(hit_rate_at_k(&list(&[0, 1]), &t, 2, 4.0), Some(true));
        assert_eq!(hit_rate_at_k(&list(&[2, 3]), &t, 2, 4.0), Some(false));
        assert_eq!(hit_rate_at_k(&list(&[0]), &truth(&[(0, 1.0)]), 1, 4.0), None);
    }
}
