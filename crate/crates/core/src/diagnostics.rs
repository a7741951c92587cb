//! Corpus diagnostics: n-gram overlap, embedding-similarity distributions,
//! citation proximity and coupling recall of recommendation pairs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{strip_reference_mentions, HeteroGraph, NodeId};
use crate::linalg::cosine;
use crate::sampling::stream;

/// Number of uniform histogram buckets over the observed range.
pub const HISTOGRAM_BUCKETS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCategory {
    Recommendation,
    Citation,
    Global,
}

impl PairCategory {
    pub const ALL: [PairCategory; 3] = [Self::Recommendation, Self::Citation, Self::Global];

    pub fn name(self) -> &'static str {
        match self {
            Self::Recommendation => "recommendation",
            Self::Citation => "citation",
            Self::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairSample {
    pub seed: NodeId,
    pub other: NodeId,
    pub category: PairCategory,
}

impl PairSample {
    pub fn new(seed: NodeId, other: NodeId, category: PairCategory) -> Result<Self> {
        if seed == other {
            return Err(Error::Validation(format!("pair sample has identical endpoints {seed}")));
        }
        Ok(Self { seed, other, category })
    }

    pub fn papers(seed: usize, other: usize, category: PairCategory) -> Result<Self> {
        Self::new(NodeId::paper(seed), NodeId::paper(other), category)
    }
}

/// Lowercased alphanumeric tokens; every run of other characters separates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_set(text: &str, n: usize) -> BTreeSet<Vec<String>> {
    let tokens = tokenize(text);
    if tokens.len() < n {
        return BTreeSet::new();
    }
    tokens.windows(n).map(<[String]>::to_vec).collect()
}

/// Jaccard similarity of the word n-gram sets of `a` and `b`; 0 when both are
/// empty. `n = 0` is treated as 1.
pub fn jaccard_ngram(a: &str, b: &str, n: usize) -> f64 {
    let n = n.max(1);
    let sa = ngram_set(a, n);
    let sb = ngram_set(b, n);
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Counts over `HISTOGRAM_BUCKETS` equal-width buckets spanning
    /// `[min, max]`; the last bucket is closed.
    pub histogram: Vec<usize>,
}

/// Summary statistics of `values`, or `None` when there are none.
pub fn summarize(values: &[f64]) -> Option<DistributionSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mut histogram = vec![0; HISTOGRAM_BUCKETS];
    let width = max - min;
    for &v in values {
        let b = if width > 0.0 {
            (((v - min) / width * HISTOGRAM_BUCKETS as f64) as usize).min(HISTOGRAM_BUCKETS - 1)
        } else {
            0
        };
        histogram[b] += 1;
    }
    Some(DistributionSummary {
        count: values.len(),
        mean,
        median,
        std: var.sqrt(),
        min,
        max,
        histogram,
    })
}

/// Hop distances from `source` to every paper over citation edges only;
/// `None` marks unreachable papers.
pub fn citation_distances(g: &HeteroGraph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.num_papers()];
    if source >= g.num_papers() {
        return dist;
    }
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for &v in g.citations(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Shortest citation-path length per input pair; `None` when no path
    /// exists or an endpoint is not a paper.
    pub lengths: Vec<Option<usize>>,
    /// Fraction of pairs at each finite length.
    pub fraction_by_length: BTreeMap<usize, f64>,
    pub fraction_disconnected: f64,
}

/// Shortest citation-path lengths for each pair, computed with one
/// breadth-first search per distinct seed.
pub fn citation_path_stats(g: &HeteroGraph, pairs: &[PairSample]) -> PathStats {
    let seeds: BTreeSet<usize> = pairs
        .iter()
        .filter(|p| p.seed.is_paper() && p.other.is_paper())
        .map(|p| p.seed.index)
        .collect();
    let seeds: Vec<usize> = seeds.into_iter().collect();
    let tables: BTreeMap<usize, Vec<Option<usize>>> = seeds
        .par_iter()
        .map(|&s| (s, citation_distances(g, s)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let lengths: Vec<Option<usize>> = pairs
        .iter()
        .map(|p| {
            if !(p.seed.is_paper() && p.other.is_paper()) {
                return None;
            }
            tables[&p.seed.index].get(p.other.index).copied().flatten()
        })
        .collect();
    let total = lengths.len().max(1) as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut disconnected = 0;
    for l in &lengths {
        match l {
            Some(l) => *counts.entry(*l).or_default() += 1,
            None => disconnected += 1,
        }
    }
    PathStats {
        fraction_by_length: counts.into_iter().map(|(l, c)| (l, c as f64 / total)).collect(),
        fraction_disconnected: if lengths.is_empty() { 0.0 } else { disconnected as f64 / total },
        lengths,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Both papers cite a common paper.
    BibliographicCoupling,
    /// Both papers are cited by a common paper.
    CoCitation,
}

/// Per-paper neighbour sets used for coupling under `mode`. Without directed
/// citation input both modes use the undirected citation neighbourhood.
fn coupling_neighbors(g: &HeteroGraph, mode: CouplingMode) -> Vec<BTreeSet<usize>> {
    match g.directed_citations() {
        Some(directed) => {
            let mut sets = vec![BTreeSet::new(); g.num_papers()];
            for &(citing, cited) in directed {
                match mode {
                    CouplingMode::BibliographicCoupling => sets[citing].insert(cited),
                    CouplingMode::CoCitation => sets[cited].insert(citing),
                };
            }
            sets
        }
        None => (0..g.num_papers())
            .map(|p| g.citations(p).iter().copied().collect())
            .collect(),
    }
}

/// Fraction of `(seed, other)` paper pairs sharing at least one coupled
/// neighbour.
pub fn coupling_recall(g: &HeteroGraph, pairs: &[(usize, usize)], mode: CouplingMode) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Validation("coupling recall needs at least one pair".into()));
    }
    let n = g.num_papers();
    if let Some(&(s, r)) = pairs.iter().find(|&&(s, r)| s >= n || r >= n) {
        return Err(Error::UnknownNode(format!("pair ({s}, {r}) outside {n} papers")));
    }
    let sets = coupling_neighbors(g, mode);
    let hits = pairs
        .iter()
        .filter(|&&(s, r)| !sets[s].is_disjoint(&sets[r]))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Cosine similarity per pair in input order; `None` for pairs with a
/// zero-norm endpoint.
pub fn pair_similarities(g: &HeteroGraph, pairs: &[PairSample]) -> Result<Vec<Option<f64>>> {
    for p in pairs {
        for node in [p.seed, p.other] {
            if !g.contains(node) {
                return Err(Error::UnknownNode(node.to_string()));
            }
        }
    }
    Ok(pairs
        .par_iter()
        .map(|p| cosine(g.features(p.seed), g.features(p.other)))
        .collect())
}

/// Cosine-similarity summary per category. Pairs with a zero-norm endpoint
/// are skipped with a warning.
pub fn similarity_distribution(
    g: &HeteroGraph,
    pairs: &[PairSample],
) -> Result<BTreeMap<PairCategory, DistributionSummary>> {
    let sims = pair_similarities(g, pairs)?;
    Ok(group_summaries(pairs, &sims, "cosine similarity"))
}

fn group_summaries(
    pairs: &[PairSample],
    values: &[Option<f64>],
    what: &str,
) -> BTreeMap<PairCategory, DistributionSummary> {
    let mut by_cat: BTreeMap<PairCategory, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for (p, v) in pairs.iter().zip(values) {
        match v {
            Some(v) => by_cat.entry(p.category).or_default().push(*v),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("{skipped} pairs skipped for {what}: zero-norm or missing input");
    }
    by_cat
        .into_iter()
        .filter_map(|(c, v)| summarize(&v).map(|s| (c, s)))
        .collect()
}

/// How capped categories are subsampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSelection {
    #[default]
    Random,
    /// Keep the pairs with the highest embedding cosine similarity.
    TopSimilarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// n-gram order for text overlap.
    pub ngram: usize,
    /// Per-category cap on the number of pairs; `None` keeps all.
    pub sample_cap: Option<usize>,
    pub selection: PairSelection,
    /// Number of random global pairs drawn before capping; defaults to the
    /// number of recommendation pairs.
    pub global_pairs: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            ngram: 2,
            sample_cap: Some(420),
            selection: PairSelection::Random,
            global_pairs: None,
        }
    }
}

/// Builds the three pair populations: recommendation pairs from aspect edges
/// (distinct unordered pairs), citation pairs from citation edges, and
/// uniformly random distinct paper pairs.
pub fn sample_pairs(g: &HeteroGraph, cfg: &DiagnosticsConfig, seed: u64) -> Result<Vec<PairSample>> {
    let rec: BTreeSet<(usize, usize)> = g.aspect_edges().iter().map(|e| (e.a, e.b)).collect();
    let cit = g.citation_edges();
    let n = g.num_papers();
    let mut rng = stream(seed, 0);
    let mut global = BTreeSet::new();
    if n >= 2 {
        let want = cfg.global_pairs.unwrap_or(rec.len()).min(n * (n - 1) / 2);
        while global.len() < want {
            let pick = rand::seq::index::sample(&mut rng, n, 2);
            let (a, b) = (pick.index(0), pick.index(1));
            global.insert((a.min(b), a.max(b)));
        }
    }
    let mut out = Vec::new();
    for (cat, set) in [
        (PairCategory::Recommendation, rec.into_iter().collect::<Vec<_>>()),
        (PairCategory::Citation, cit),
        (PairCategory::Global, global.into_iter().collect()),
    ] {
        let mut pairs: Vec<PairSample> = set
            .into_iter()
            .map(|(a, b)| PairSample::papers(a, b, cat))
            .collect::<Result<_>>()?;
        if let Some(cap) = cfg.sample_cap {
            if pairs.len() > cap {
                match cfg.selection {
                    PairSelection::Random => {
                        pairs.shuffle(&mut rng);
                        pairs.truncate(cap);
                        pairs.sort();
                    }
                    PairSelection::TopSimilarity => {
                        let sims = pair_similarities(g, &pairs)?;
                        let mut idx: Vec<usize> = (0..pairs.len()).collect();
                        let key = |i: usize| sims[i].unwrap_or(f64::NEG_INFINITY);
                        idx.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));
                        idx.truncate(cap);
                        idx.sort_unstable();
                        pairs = idx.into_iter().map(|i| pairs[i]).collect();
                    }
                }
            }
        }
        out.extend(pairs);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub num_pairs: usize,
    pub fraction_by_length: BTreeMap<usize, f64>,
    pub fraction_disconnected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub num_pairs: BTreeMap<PairCategory, usize>,
    pub similarity: BTreeMap<PairCategory, DistributionSummary>,
    pub citation_paths: BTreeMap<PairCategory, PathSummary>,
    pub bibliographic_coupling_recall: f64,
    pub co_citation_recall: f64,
    /// False when no directed citation input was loaded, in which case the
    /// two coupling modes coincide.
    pub coupling_directed: bool,
    pub ngram: usize,
    /// Present when paper texts were supplied.
    pub text_overlap: Option<BTreeMap<PairCategory, DistributionSummary>>,
}

/// One row of the per-pair CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair: PairSample,
    pub cosine: Option<f64>,
    pub path_length: Option<usize>,
    pub jaccard: Option<f64>,
}

/// Runs every analysis over `pairs`. `texts`, when given, holds one text per
/// paper; reference mentions are stripped before tokenisation.
pub fn run_diagnostics(
    g: &HeteroGraph,
    pairs: &[PairSample],
    texts: Option<&[String]>,
    ngram: usize,
) -> Result<(DiagnosticsReport, Vec<PairRecord>)> {
    if let Some(t) = texts {
        if t.len() != g.num_papers() {
            return Err(Error::DimensionMismatch(format!(
                "{} texts for {} papers",
                t.len(),
                g.num_papers()
            )));
        }
    }
    let sims = pair_similarities(g, pairs)?;
    let paths = citation_path_stats(g, pairs);
    let cleaned: Option<Vec<String>> = texts.map(|t| t.iter().map(|s| strip_reference_mentions(s)).collect());
    let jac: Option<Vec<Option<f64>>> = cleaned.as_ref().map(|t| {
        pairs
            .par_iter()
            .map(|p| {
                (p.seed.is_paper() && p.other.is_paper())
                    .then(|| jaccard_ngram(&t[p.seed.index], &t[p.other.index], ngram))
            })
            .collect()
    });

    let mut num_pairs = BTreeMap::new();
    let mut citation_paths = BTreeMap::new();
    for cat in PairCategory::ALL {
        let lengths: Vec<Option<usize>> = pairs
            .iter()
            .zip(&paths.lengths)
            .filter(|(p, _)| p.category == cat)
            .map(|(_, l)| *l)
            .collect();
        if lengths.is_empty() {
            continue;
        }
        num_pairs.insert(cat, lengths.len());
        let total = lengths.len() as f64;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for l in lengths.iter().flatten() {
            *counts.entry(*l).or_default() += 1;
        }
        citation_paths.insert(
            cat,
            PathSummary {
                num_pairs: lengths.len(),
                fraction_by_length: counts.into_iter().map(|(l, c)| (l, c as f64 / total)).collect(),
                fraction_disconnected: lengths.iter().filter(|l| l.is_none()).count() as f64 / total,
            },
        );
    }

    let rec: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|p| p.category == PairCategory::Recommendation && p.seed.is_paper() && p.other.is_paper())
        .map(|p| (p.seed.index, p.other.index))
        .collect();
    let (bc, cc) = if rec.is_empty() {
        warn!("no recommendation pairs; coupling recall reported as 0");
        (0.0, 0.0)
    } else {
        (
            coupling_recall(g, &rec, CouplingMode::BibliographicCoupling)?,
            coupling_recall(g, &rec, CouplingMode::CoCitation)?,
        )
    };
    let coupling_directed = g.directed_citations().is_some();
    if !coupling_directed {
        warn!("no directed citation input: bibliographic coupling and co-citation coincide");
    }

    let report = DiagnosticsReport {
        num_pairs,
        similarity: group_summaries(pairs, &sims, "cosine similarity"),
        citation_paths,
        bibliographic_coupling_recall: bc,
        co_citation_recall: cc,
        coupling_directed,
        ngram: ngram.max(1),
        text_overlap: jac.as_ref().map(|j| group_summaries(pairs, j, "text overlap")),
    };
    let records = pairs
        .iter()
        .enumerate()
        .map(|(i, &pair)| PairRecord {
            pair,
            cosine: sims[i],
            path_length: paths.lengths[i],
            jaccard: jac.as_ref().and_then(|j| j[i]),
        })
        .collect();
    Ok((report, records))
}

/// Writes per-pair values as CSV; missing values are empty fields.
pub fn write_pairs_csv<W: Write>(mut out: W, records: &[PairRecord]) -> std::io::Result<()> {
    writeln!(out, "category,seed,other,cosine,path_length,jaccard")?;
    for r in records {
        let opt = |v: Option<String>| v.unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.pair.category.name(),
            r.pair.seed,
            r.pair.other,
            opt(r.cosine.map(|v| format!("{v:?}"))),
            opt(r.path_length.map(|v| v.to_string())),
            opt(r.jaccard.map(|v| format!("{v:?}"))),
        )?;
    }
    Ok(())
}
