//! Hard-negative pools mined from ingested feature similarity.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;

use crate::graph::AspectId;
use crate::linalg::{cosine, Matrix};

/// Candidate negatives per `(query, aspect)` key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NegativePools {
    pub pools: BTreeMap<(usize, AspectId), Vec<usize>>,
    /// Keys whose top candidates were all positives and fell back to the
    /// whole corpus.
    pub fallbacks: Vec<(usize, AspectId)>,
}

impl NegativePools {
    pub fn get(&self, query: usize, aspect: AspectId) -> Option<&[usize]> {
        self.pools.get(&(query, aspect)).map(Vec::as_slice)
    }
}

/// Papers ordered by descending cosine similarity to `query`, ties by id,
/// the query itself excluded. Zero-norm vectors count as similarity 0.
pub fn cosine_ranking(features: &Matrix, query: usize) -> Vec<(usize, f64)> {
    let q = features.row(query);
    let mut ranked: Vec<(usize, f64)> = (0..features.rows())
        .filter(|&p| p != query)
        .map(|p| (p, cosine(q, features.row(p)).unwrap_or(0.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// For every `(query, aspect)` in `positives`, keeps the `pool_size` papers
/// most cosine-similar to the query and removes the query's training
/// positives for that aspect. An emptied pool falls back to every
/// non-positive paper, with a warning.
pub fn mine_hard_negatives(
    features: &Matrix,
    positives: &[(usize, usize, AspectId)],
    pool_size: usize,
) -> NegativePools {
    let pool_size = pool_size.max(1);
    let mut by_key: BTreeMap<(usize, AspectId), BTreeSet<usize>> = BTreeMap::new();
    for &(q, p, k) in positives {
        by_key.entry((q, k)).or_default().insert(p);
    }
    let mut rankings: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut out = NegativePools::default();
    for ((q, k), pos) in by_key {
        let ranking = rankings
            .entry(q)
            .or_insert_with(|| cosine_ranking(features, q).into_iter().map(|(p, _)| p).collect());
        let mut pool: Vec<usize> = ranking
            .iter()
            .take(pool_size)
            .copied()
            .filter(|c| !pos.contains(c))
            .collect();
        if pool.is_empty() {
            warn!("negative pool for query {q}, aspect {k} exhausted; using all non-positive papers");
            pool = ranking.iter().copied().filter(|c| !pos.contains(c)).collect();
            pool.sort_unstable();
            out.fallbacks.push((q, k));
        }
        out.pools.insert((q, k), pool);
    }
    out
}
