//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls the library's forward, backward or metric code; the
//! oracles recompute the same quantities with dense, straightforward loops.

#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeSet;

use achgnn::graph::{AspectEdge, AspectId, HeteroGraph};
use achgnn::linalg::Matrix;
use achgnn::model::{ModelConfig, ModelParams};
use achgnn::training::TrainConfig;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random heterogeneous graph with Gaussian features, Bernoulli citations,
/// one to three authors per paper and `num_aspects` random aspect pairs per
/// aspect.
pub fn random_graph(
    num_papers: usize,
    num_authors: usize,
    dim: usize,
    num_aspects: usize,
    cite_prob: f64,
    seed: u64,
) -> HeteroGraph {
    let mut r = rng(seed);
    let feats = |n: usize, r: &mut ChaCha8Rng| {
        Matrix::from_vec(n, dim, (0..n * dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
    };
    let pf = feats(num_papers, &mut r);
    let af = feats(num_authors, &mut r);
    let mut cites = Vec::new();
    for i in 0..num_papers {
        for j in i + 1..num_papers {
            if r.random::<f64>() < cite_prob {
                cites.push((i, j));
            }
        }
    }
    let mut auth = Vec::new();
    if num_authors > 0 {
        for p in 0..num_papers {
            for _ in 0..r.random_range(1..=3) {
                auth.push((r.random_range(0..num_authors), p));
            }
        }
    }
    auth.sort_unstable();
    auth.dedup();
    let mut aspects = BTreeSet::new();
    for k in 0..num_aspects {
        for _ in 0..num_papers {
            let a = r.random_range(0..num_papers);
            let b = r.random_range(0..num_papers);
            if a != b {
                aspects.insert(AspectEdge::new(a, b, AspectId(k)));
            }
        }
    }
    let aspects: Vec<AspectEdge> = aspects.into_iter().collect();
    let names = (0..num_aspects).map(|k| format!("k{k}")).collect();
    HeteroGraph::build(pf, af, &cites, &auth, &aspects, names).unwrap().0
}

pub fn small_model(num_layers: usize, hidden: usize, aspect_dim: usize, mlp: usize) -> ModelConfig {
    ModelConfig::uniform(num_layers, hidden, aspect_dim, mlp)
}

/// Random parameters with non-zero biases so every tensor participates.
pub fn random_params(cfg: &ModelConfig, g: &HeteroGraph, seed: u64) -> ModelParams {
    let mut r = rng(seed);
    let mut p = ModelParams::init(cfg, g.feature_dim(), g.num_aspects(), &mut r).unwrap();
    for t in p.tensors_mut() {
        if t.name.ends_with("bias") {
            for v in t.data.iter_mut() {
                *v = r.random_range(-0.3..0.3);
            }
        }
    }
    p
}

/// Configuration used by the learning-behaviour checks on the planted graph.
pub fn quick_train_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        learning_rate: 5e-3,
        batch_size: 64,
        num_epochs: 30,
        seed,
        ..TrainConfig::default()
    };
    cfg.model = ModelConfig::uniform(2, 64, 16, 64);
    cfg
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn dense_matvec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// Full-graph dense encoder: every node at every layer, neighbourhood means
/// from dense adjacency rows. Returns `(paper_states, author_states)` after
/// the last layer.
pub fn dense_encode(g: &HeteroGraph, params: &ModelParams) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let np = g.num_papers();
    let na = g.num_authors();
    let mut cite = vec![vec![false; np]; np];
    for (a, b) in g.citation_edges() {
        cite[a][b] = true;
        cite[b][a] = true;
    }
    let mut wrote = vec![vec![false; na]; np];
    for (a, p) in g.authorship_edges() {
        wrote[p][a] = true;
    }
    let mut hp: Vec<Vec<f64>> = (0..np).map(|i| g.paper_features().row(i).to_vec()).collect();
    let mut ha: Vec<Vec<f64>> = (0..na).map(|i| g.author_features().row(i).to_vec()).collect();

    fn mean(rows: &[Vec<f64>], mask: &[bool]) -> Option<Vec<f64>> {
        let chosen: Vec<&Vec<f64>> = rows.iter().zip(mask).filter(|(_, m)| **m).map(|(r, _)| r).collect();
        if chosen.is_empty() {
            return None;
        }
        let d = chosen[0].len();
        let mut out = vec![0.0; d];
        for r in &chosen {
            for j in 0..d {
                out[j] += r[j];
            }
        }
        Some(out.into_iter().map(|v| v / chosen.len() as f64).collect())
    }

    for layer in &params.layers {
        let [w_cite, w_auth] = &layer.relation_weights;
        let step = |own: &[f64], c: Option<Vec<f64>>, a: Option<Vec<f64>>| -> Vec<f64> {
            let mut out = dense_matvec(&layer.self_weight, own);
            for (w, m) in [(w_cite, c), (w_auth, a)] {
                if let Some(m) = m {
                    for (o, v) in out.iter_mut().zip(dense_matvec(w, &m)) {
                        *o += v;
                    }
                }
            }
            out.into_iter().map(relu).collect()
        };
        let new_p: Vec<Vec<f64>> = (0..np)
            .map(|i| step(&hp[i], mean(&hp, &cite[i]), mean(&ha, &wrote[i])))
            .collect();
        let new_a: Vec<Vec<f64>> = (0..na)
            .map(|a| {
                let mask: Vec<bool> = (0..np).map(|p| wrote[p][a]).collect();
                step(&ha[a], None, mean(&hp, &mask))
            })
            .collect();
        hp = new_p;
        ha = new_a;
    }
    (hp, ha)
}

fn dense_mlp(
    hidden_w: &Matrix,
    hidden_b: &[f64],
    out_w: &Matrix,
    out_b: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let h: Vec<f64> = dense_matvec(hidden_w, z)
        .into_iter()
        .zip(hidden_b)
        .map(|(v, b)| relu(v + b))
        .collect();
    dense_matvec(out_w, &h).into_iter().zip(out_b).map(|(v, b)| v + b).collect()
}

/// Scorer output for `[h_q, h_c, h_q * h_c, e_k]`.
pub fn dense_score(params: &ModelParams, hq: &[f64], hc: &[f64], k: usize) -> f64 {
    let mut z: Vec<f64> = hq.to_vec();
    z.extend_from_slice(hc);
    z.extend(hq.iter().zip(hc).map(|(a, b)| a * b));
    z.extend((0..params.aspect_table.cols()).map(|j| params.aspect_table[(k, j)]));
    let s = &params.scorer;
    dense_mlp(&s.hidden_weight, &s.hidden_bias, &s.out_weight, &s.out_bias, &z)[0]
}

/// Classifier logits for `[h_q, h_c, h_q * h_c]`.
pub fn dense_logits(params: &ModelParams, hq: &[f64], hc: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = hq.to_vec();
    z.extend_from_slice(hc);
    z.extend(hq.iter().zip(hc).map(|(a, b)| a * b));
    let c = &params.classifier;
    dense_mlp(&c.hidden_weight, &c.hidden_bias, &c.out_weight, &c.out_bias, &z)
}

/// Relative difference with a small absolute floor so exact zeros compare.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central finite differences of `f` with respect to every entry of every
/// tensor. Returns `(tensor name, flat index, numeric gradient)`.
pub fn finite_differences(
    params: &ModelParams,
    step: f64,
    f: impl Fn(&ModelParams) -> f64,
) -> Vec<(String, usize, f64)> {
    let names: Vec<(String, usize)> = params.tensors().iter().map(|t| (t.name.clone(), t.data.len())).collect();
    let mut out = Vec::new();
    for (ti, (name, len)) in names.iter().enumerate() {
        for i in 0..*len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data[i] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data[i] -= step;
            out.push((name.clone(), i, (f(&plus) - f(&minus)) / (2.0 * step)));
        }
    }
    out
}

/// Exact P@k, R@k and MRR@k as rationals. `ranked` lists candidate ids best
/// first.
pub fn rational_metrics(
    relevant: &BTreeSet<usize>,
    ranked: &[usize],
    k: usize,
) -> (Ratio<i64>, Option<Ratio<i64>>, Ratio<i64>) {
    let top: Vec<usize> = ranked.iter().copied().take(k).collect();
    let mut hits = 0i64;
    let mut first = None;
    for (i, c) in top.iter().enumerate() {
        if relevant.contains(c) {
            hits += 1;
            if first.is_none() {
                first = Some(i as i64 + 1);
            }
        }
    }
    let precision = Ratio::new(hits, k as i64);
    let recall = (!relevant.is_empty()).then(|| Ratio::new(hits, relevant.len() as i64));
    let mrr = first.map_or(Ratio::from_integer(0), |r| Ratio::new(1, r));
    (precision, recall, mrr)
}

/// The correctly rounded `f64` of an exact rational.
pub fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// All-pairs shortest citation-hop distances; `None` when unreachable.
pub fn floyd_warshall(g: &HeteroGraph) -> Vec<Vec<Option<usize>>> {
    let n = g.num_papers();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (a, b) in g.citation_edges() {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|v| (v < inf).then_some(v)).collect())
        .collect()
}

/// Whether `s` and `r` share a citation neighbour, by scanning every paper.
pub fn share_citation_neighbor(g: &HeteroGraph, s: usize, r: usize) -> bool {
    let edges: BTreeSet<(usize, usize)> = g
        .citation_edges()
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .collect();
    (0..g.num_papers()).any(|t| edges.contains(&(s, t)) && edges.contains(&(r, t)))
}

/// Prints and records one acceptance verdict.
pub fn verdict(id: usize, title: &str, passed: bool, detail: &str) -> bool {
    println!(
        "criterion {id:>2} [{}] {title}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}
