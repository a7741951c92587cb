//! Candidate scoring and ordering.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{AspectSel, RankedList};
use crate::error::{Error, Result};
use crate::graph::{AspectId, HeteroGraph, NodeId};
use crate::linalg::{dot, norm, Matrix};
use crate::model::{score_pair, ModelParams};
use crate::sampling::{build_inference_sample, FanoutConfig, InferencePolicy};

/// How an aspect-conditioned model scores a pair when no aspect is given.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneralRule {
    /// Best score over all aspects.
    #[default]
    Max,
    /// Average score over all aspects.
    Mean,
}

/// Anything that can score a `(query, candidate)` pair under an aspect.
pub trait PairScorer: Sync {
    fn score(&self, query: usize, candidate: usize, aspect: AspectSel) -> Result<f64>;
}

/// Scores with a trained model over precomputed paper embeddings.
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
    embeddings: Vec<Option<Vec<f64>>>,
    rule: GeneralRule,
}

impl<'a> ModelScorer<'a> {
    /// Encodes `papers` (or every paper when `None`) with the inference
    /// sampling policy.
    pub fn new(
        g: &HeteroGraph,
        params: &'a ModelParams,
        fanout: &FanoutConfig,
        policy: &InferencePolicy,
        rule: GeneralRule,
        papers: Option<&[usize]>,
    ) -> Result<Self> {
        let seeds: Vec<NodeId> = match papers {
            Some(list) => list.iter().map(|&p| NodeId::paper(p)).collect(),
            None => (0..g.num_papers()).map(NodeId::paper).collect(),
        };
        let fanout = FanoutConfig {
            num_layers: params.num_layers(),
            ..*fanout
        };
        let sample = build_inference_sample(g, &seeds, &fanout, policy)?;
        let encoded = crate::model::encode(g, params, &sample)?;
        let mut embeddings = vec![None; g.num_papers()];
        for (node, h) in encoded.iter() {
            embeddings[node.index] = Some(h.to_vec());
        }
        Ok(Self {
            params,
            embeddings,
            rule,
        })
    }

    pub fn embedding(&self, paper: usize) -> Result<&[f64]> {
        self.embeddings
            .get(paper)
            .and_then(Option::as_deref)
            .ok_or_else(|| Error::UnknownNode(format!("p{paper} has no embedding")))
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }
}

impl PairScorer for ModelScorer<'_> {
    fn score(&self, query: usize, candidate: usize, aspect: AspectSel) -> Result<f64> {
        let (h_q, h_c) = (self.embedding(query)?, self.embedding(candidate)?);
        match aspect {
            AspectSel::Aspect(k) => score_pair(self.params, h_q, h_c, k),
            AspectSel::General => {
                let n = self.params.num_aspects();
                let scores = (0..n)
                    .map(|k| score_pair(self.params, h_q, h_c, AspectId(k)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(match self.rule {
                    GeneralRule::Max => scores.into_iter().fold(f64::NEG_INFINITY, f64::max),
                    GeneralRule::Mean => scores.iter().sum::<f64>() / n as f64,
                })
            }
        }
    }
}

/// Aspect-agnostic cosine similarity over ingested features.
pub struct CosineScorer<'a> {
    features: &'a Matrix,
    norms: Vec<f64>,
}

impl<'a> CosineScorer<'a> {
    pub fn new(features: &'a Matrix) -> Self {
        let norms = (0..features.rows()).map(|i| norm(features.row(i))).collect();
        Self { features, norms }
    }
}

impl PairScorer for CosineScorer<'_> {
    fn score(&self, query: usize, candidate: usize, _aspect: AspectSel) -> Result<f64> {
        let (nq, nc) = (self.norms[query], self.norms[candidate]);
        if nq == 0.0 || nc == 0.0 {
            warn!("zero-norm feature vector for p{query} or p{candidate}; cosine set to 0");
            return Ok(0.0);
        }
        Ok(dot(self.features.row(query), self.features.row(candidate)) / (nq * nc))
    }
}

/// Descending score, ascending id on ties.
pub fn sort_entries(entries: &mut [(usize, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Scores every candidate with `scorer` and orders them.
pub fn rank_with(
    scorer: &dyn PairScorer,
    query: usize,
    aspect: AspectSel,
    candidates: &[usize],
) -> Result<RankedList> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to rank".into()));
    }
    if candidates.contains(&query) {
        return Err(Error::Config(format!("query p{query} is among its own candidates")));
    }
    let mut unique = candidates.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let mut entries = unique
        .into_iter()
        .map(|c| Ok((c, scorer.score(query, c, aspect)?)))
        .collect::<Result<Vec<_>>>()?;
    if let Some((c, s)) = entries.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Divergence {
            epoch: 0,
            step: 0,
            detail: format!("non-finite score {s} for candidate p{c}"),
        });
    }
    sort_entries(&mut entries);
    Ok(RankedList {
        query,
        aspect,
        entries,
    })
}

/// Ranks `candidates` for `query` with the model, encoding exactly the
/// papers involved.
#[allow(clippy::too_many_arguments)]
pub fn rank_candidates(
    g: &HeteroGraph,
    params: &ModelParams,
    query: usize,
    aspect: AspectSel,
    candidates: &[usize],
    fanout: &FanoutConfig,
    policy: &InferencePolicy,
    rule: GeneralRule,
) -> Result<RankedList> {
    if let AspectSel::Aspect(k) = aspect {
        if k.0 >= params.num_aspects() {
            return Err(Error::UnknownAspect(k.to_string()));
        }
    }
    if query >= g.num_papers() {
        return Err(Error::UnknownNode(format!("p{query}")));
    }
    if let Some(c) = candidates.iter().find(|&&c| c >= g.num_papers()) {
        return Err(Error::UnknownNode(format!("p{c}")));
    }
    let mut papers = candidates.to_vec();
    papers.push(query);
    let scorer = ModelScorer::new(g, params, fanout, policy, rule, Some(&papers))?;
    rank_with(&scorer, query, aspect, candidates)
}

/// Top-`k` candidates by cosine similarity of their feature vectors.
pub fn knn_baseline(features: &Matrix, query: usize, candidates: &[usize], k: usize) -> Result<RankedList> {
    let scorer = CosineScorer::new(features);
    let mut list = rank_with(&scorer, query, AspectSel::General, candidates)?;
    list.entries.truncate(k);
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl PairScorer for Fixed {
        fn score(&self, _q: usize, c: usize, _a: AspectSel) -> Result<f64> {
            Ok(self.0[c])
        }
    }

    #[test]
    fn sorted_descending_with_id_tie_break() {
        let mut scores = vec![0.0; 10];
        scores[1] = 0.9;
        scores[2] = 0.1;
        let s = Fixed(scores.clone());
        let r = rank_with(&s, 0, AspectSel::General, &[2, 1]).unwrap();
        assert_eq!(r.ids(), vec![1, 2]);
        scores[7] = 0.5;
        scores[3] = 0.5;
        let r = rank_with(&Fixed(scores), 0, AspectSel::General, &[7, 3]).unwrap();
        assert_eq!(r.ids(), vec![3, 7]);
    }

    #[test]
    fn query_in_candidates_rejected() {
        let s = Fixed(vec![0.0; 3]);
        assert!(rank_with(&s, 1, AspectSel::General, &[0, 1]).is_err());
        assert!(rank_with(&s, 1, AspectSel::General, &[]).is_err());
    }

    #[test]
    fn knn_orders_by_cosine() {
        let f = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![0.0, 3.0],
            vec![2.0, 2.0],
            vec![-1.0, 1.0],
            vec![0.0, 0.0],
        ]);
        let r = knn_baseline(&f, 0, &[1, 2, 3, 4], 10).unwrap();
        assert_eq!(r.ids(), vec![2, 1, 3, 4]);
        let r = knn_baseline(&f, 0, &[1, 2, 3, 4], 2).unwrap();
        assert_eq!(r.ids(), vec![2, 1]);
    }
}
