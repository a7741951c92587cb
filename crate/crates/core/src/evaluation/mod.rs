//! Retrieval protocols, metrics, baselines, fold splitting and ablations.

mod ablation;
mod folds;
mod metrics;
mod ranking;

pub use ablation::{
    apply_variant, randomize_authorship, remove_authorship, run_ablation, run_ablations, run_fold, run_variant, training_pairs,
    AblationOutcome, ExperimentConfig, Variant,
};
pub use folds::{split_folds, FoldSplit};
pub use metrics::{mrr_at_k, precision_at_k, recall_at_k};
pub use ranking::{
    knn_baseline, rank_candidates, rank_with, sort_entries, CosineScorer, GeneralRule, ModelScorer,
    PairScorer,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AspectEdge, AspectId, HeteroGraph};
use crate::model::{predict_aspect, ModelParams};
use crate::sampling::{FanoutConfig, InferencePolicy};

/// Retrieval condition: a specific aspect or the pooled aspect-agnostic one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AspectSel {
    Aspect(AspectId),
    General,
}

/// Candidates for one `(query, aspect)`, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query: usize,
    pub aspect: AspectSel,
    pub entries: Vec<(usize, f64)>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<usize> {
        self.entries.iter().map(|(c, _)| *c).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    PerAspect,
    General,
    #[default]
    Both,
}

impl EvalMode {
    fn per_aspect(self) -> bool {
        matches!(self, EvalMode::PerAspect | EvalMode::Both)
    }

    fn general(self) -> bool {
        matches!(self, EvalMode::General | EvalMode::Both)
    }
}

/// Query-averaged metrics for one retrieval condition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    pub mrr: f64,
    pub num_queries: usize,
    /// Queries whose relevance set was empty after candidate filtering.
    pub skipped_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub per_aspect: Vec<MetricSummary>,
    pub general: Option<MetricSummary>,
}

impl EvalReport {
    pub fn aspect(&self, k: AspectId) -> Option<&MetricSummary> {
        self.per_aspect.get(k.0)
    }

    /// Unweighted mean of per-aspect recall over aspects with queries.
    pub fn macro_recall(&self) -> f64 {
        let used: Vec<&MetricSummary> = self.per_aspect.iter().filter(|m| m.num_queries > 0).collect();
        if used.is_empty() {
            return 0.0;
        }
        used.iter().map(|m| m.recall_at_k).sum::<f64>() / used.len() as f64
    }

    /// Aligned plain-text table with P, R and MRR per condition.
    pub fn to_table(&self) -> String {
        let mut cols: Vec<&MetricSummary> = Vec::new();
        cols.extend(self.general.iter());
        cols.extend(self.per_aspect.iter());
        let width = cols.iter().map(|m| m.name.len()).max().unwrap_or(0).max(20);
        let mut s = String::new();
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>8}", "condition", "P", "R", "MRR", "queries");
        for m in cols {
            let _ = writeln!(
                s,
                "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>8}",
                m.name, m.precision_at_k, m.recall_at_k, m.mrr, m.num_queries
            );
        }
        s
    }
}

/// Fold-averaged report: metrics are the unweighted mean over reports,
/// query counts are summed. `None` for an empty slice or mismatched shapes.
pub fn average_reports(reports: &[EvalReport]) -> Option<EvalReport> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let avg = |pick: &dyn Fn(&EvalReport) -> Option<&MetricSummary>| -> Option<MetricSummary> {
        let items: Vec<&MetricSummary> = reports.iter().map(pick).collect::<Option<_>>()?;
        Some(MetricSummary {
            name: items[0].name.clone(),
            precision_at_k: items.iter().map(|m| m.precision_at_k).sum::<f64>() / n,
            recall_at_k: items.iter().map(|m| m.recall_at_k).sum::<f64>() / n,
            mrr: items.iter().map(|m| m.mrr).sum::<f64>() / n,
            num_queries: items.iter().map(|m| m.num_queries).sum(),
            skipped_queries: items.iter().map(|m| m.skipped_queries).sum(),
        })
    };
    if reports
        .iter()
        .any(|r| r.k != first.k || r.per_aspect.len() != first.per_aspect.len() || r.general.is_some() != first.general.is_some())
    {
        return None;
    }
    let per_aspect = (0..first.per_aspect.len())
        .map(|i| avg(&|r: &EvalReport| r.per_aspect.get(i)))
        .collect::<Option<Vec<_>>>()?;
    let general = match first.general {
        Some(_) => Some(avg(&|r: &EvalReport| r.general.as_ref())?),
        None => None,
    };
    Some(EvalReport {
        k: first.k,
        per_aspect,
        general,
    })
}

/// Inference-side settings shared by every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub fanout: FanoutConfig,
    pub policy: InferencePolicy,
    pub general_rule: GeneralRule,
    /// Worker threads for per-query scoring; 1 keeps everything on the
    /// calling thread.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            fanout: FanoutConfig::default(),
            policy: InferencePolicy::default(),
            general_rule: GeneralRule::Max,
            threads: 1,
        }
    }
}

/// `query -> relevant papers` from unordered edges, both orientations,
/// optionally restricted to one aspect.
fn adjacency(edges: &[AspectEdge], aspect: Option<AspectId>) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in edges {
        if aspect.is_some_and(|k| k != e.aspect) {
            continue;
        }
        out.entry(e.a).or_default().insert(e.b);
        out.entry(e.b).or_default().insert(e.a);
    }
    out
}

struct QueryMetrics {
    precision: f64,
    recall: f64,
    mrr: f64,
}

fn run_queries(
    scorer: &dyn PairScorer,
    num_papers: usize,
    aspect: AspectSel,
    relevance: &BTreeMap<usize, BTreeSet<usize>>,
    excluded: &BTreeMap<usize, BTreeSet<usize>>,
    k: usize,
    threads: usize,
) -> Result<(Vec<QueryMetrics>, usize)> {
    let empty = BTreeSet::new();
    let jobs: Vec<(usize, BTreeSet<usize>, Vec<usize>)> = relevance
        .iter()
        .map(|(&q, rel)| {
            let skip = excluded.get(&q).unwrap_or(&empty);
            let candidates: Vec<usize> = (0..num_papers).filter(|&c| c != q && !skip.contains(&c)).collect();
            let rel: BTreeSet<usize> = rel.iter().copied().filter(|c| !skip.contains(c) && *c != q).collect();
            (q, rel, candidates)
        })
        .collect();

    let eval_one = |(q, rel, candidates): &(usize, BTreeSet<usize>, Vec<usize>)| -> Result<Option<QueryMetrics>> {
        if rel.is_empty() || candidates.is_empty() {
            return Ok(None);
        }
        let ranked = rank_with(scorer, *q, aspect, candidates)?;
        Ok(Some(QueryMetrics {
            precision: precision_at_k(rel, &ranked, k),
            recall: recall_at_k(rel, &ranked, k).expect("non-empty relevance"),
            mrr: mrr_at_k(rel, &ranked, k),
        }))
    };
    // Results come back in query order either way, so the reduction below is
    // independent of the thread count.
    let results: Vec<Result<Option<QueryMetrics>>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(eval_one).collect())
    } else {
        jobs.iter().map(eval_one).collect()
    };
    let mut kept = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(m) => kept.push(m),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("{skipped} queries skipped for {aspect:?}: empty relevance after filtering");
    }
    Ok((kept, skipped))
}

fn summarize(name: String, metrics: &[QueryMetrics], skipped: usize) -> MetricSummary {
    let n = metrics.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            metrics.iter().map(f).sum::<f64>() / n as f64
        }
    };
    MetricSummary {
        name,
        precision_at_k: mean(|m| m.precision),
        recall_at_k: mean(|m| m.recall),
        mrr: mean(|m| m.mrr),
        num_queries: n,
        skipped_queries: skipped,
    }
}

/// Evaluates any scorer. Relevance comes from `relevant` edges; each query's
/// papers in `excluded` edges (typically the training positives) are removed
/// from its candidates and its relevance set.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_with(
    scorer: &dyn PairScorer,
    num_papers: usize,
    aspect_names: &[String],
    relevant: &[AspectEdge],
    excluded: &[AspectEdge],
    k: usize,
    mode: EvalMode,
    threads: usize,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let excluded = adjacency(excluded, None);
    let mut per_aspect = Vec::new();
    if mode.per_aspect() {
        for (i, name) in aspect_names.iter().enumerate() {
            let k_id = AspectId(i);
            let rel = adjacency(relevant, Some(k_id));
            let (m, skipped) = run_queries(scorer, num_papers, AspectSel::Aspect(k_id), &rel, &excluded, k, threads)?;
            per_aspect.push(summarize(name.clone(), &m, skipped));
        }
    }
    let general = if mode.general() {
        let rel = adjacency(relevant, None);
        let (m, skipped) = run_queries(scorer, num_papers, AspectSel::General, &rel, &excluded, k, threads)?;
        Some(summarize("General".into(), &m, skipped))
    } else {
        None
    };
    Ok(EvalReport {
        k,
        per_aspect,
        general,
    })
}

/// Evaluates a trained model on a fold: test positives are relevant, and the
/// query and its training positives are removed from the candidates.
pub fn evaluate(
    g: &HeteroGraph,
    params: &ModelParams,
    split: &FoldSplit,
    k: usize,
    mode: EvalMode,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let scorer = ModelScorer::new(g, params, &opts.fanout, &opts.policy, opts.general_rule, None)?;
    evaluate_with(&scorer, g.num_papers(), g.aspect_names(), &split.test, &split.train, k, mode, opts.threads)
}

/// Training-set retrieval: training positives are relevant and only the
/// query itself is removed from the candidates.
pub fn evaluate_training(
    g: &HeteroGraph,
    params: &ModelParams,
    train: &[AspectEdge],
    k: usize,
    mode: EvalMode,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let scorer = ModelScorer::new(g, params, &opts.fanout, &opts.policy, opts.general_rule, None)?;
    evaluate_with(&scorer, g.num_papers(), g.aspect_names(), train, &[], k, mode, opts.threads)
}

/// The cosine-kNN baseline under the same protocol as [`evaluate`].
pub fn evaluate_knn(g: &HeteroGraph, split: &FoldSplit, k: usize, mode: EvalMode, threads: usize) -> Result<EvalReport> {
    let scorer = CosineScorer::new(g.paper_features());
    evaluate_with(&scorer, g.num_papers(), g.aspect_names(), &split.test, &split.train, k, mode, threads)
}

/// Fraction of pairs (both orientations) whose arg-max aspect logit is the
/// labeled aspect.
pub fn aspect_accuracy(
    g: &HeteroGraph,
    params: &ModelParams,
    pairs: &[AspectEdge],
    opts: &EvalOptions,
) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let scorer = ModelScorer::new(g, params, &opts.fanout, &opts.policy, opts.general_rule, None)?;
    let mut correct = 0usize;
    for e in pairs {
        for (q, c) in [(e.a, e.b), (e.b, e.a)] {
            let logits = predict_aspect(params, scorer.embedding(q)?, scorer.embedding(c)?)?;
            let best = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("at least one aspect");
            correct += usize::from(best == e.aspect.0);
        }
    }
    Ok(correct as f64 / (2 * pairs.len()) as f64)
}
