//! Top-k retrieval metrics over a single ranked list.

use std::collections::BTreeSet;

use super::RankedList;

fn hits_in_top_k(relevant: &BTreeSet<usize>, ranked: &RankedList, k: usize) -> usize {
    ranked
        .entries
        .iter()
        .take(k)
        .filter(|(c, _)| relevant.contains(c))
        .count()
}

/// `|top-k ∩ relevant| / k`; the denominator stays `k` even when fewer than
/// `k` relevant items exist.
pub fn precision_at_k(relevant: &BTreeSet<usize>, ranked: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    hits_in_top_k(relevant, ranked, k) as f64 / k as f64
}

/// `|top-k ∩ relevant| / |relevant|`, or `None` for an empty relevant set.
pub fn recall_at_k(relevant: &BTreeSet<usize>, ranked: &RankedList, k: usize) -> Option<f64> {
    assert!(k >= 1, "k must be at least 1");
    if relevant.is_empty() {
        return None;
    }
    Some(hits_in_top_k(relevant, ranked, k) as f64 / relevant.len() as f64)
}

/// Reciprocal rank of the first relevant entry within the top `k`, else 0.
pub fn mrr_at_k(relevant: &BTreeSet<usize>, ranked: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    ranked
        .entries
        .iter()
        .take(k)
        .position(|(c, _)| relevant.contains(c))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}
