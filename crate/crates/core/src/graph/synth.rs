//! Planted-structure graph generator used by tests and the acceptance suite.
//!
//! Papers belong to topical clusters and carry a within-cluster role. Paper
//! features are `cluster_scale * centroid[cluster] + role_scale * role[role] +
//! noise * N(0, I)`. Two papers of the same cluster are aspect-related iff
//! `(role_i + role_j) mod num_roles < num_aspects`, and the aspect is that
//! residue, so every query role has exactly one partner role per aspect.
//! Authors write mostly inside a home cluster and their features point at the
//! home centroid, which gives authorship edges a lineage signal.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AspectEdge, AspectId, HeteroGraph};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_papers: usize,
    pub num_authors: usize,
    pub num_aspects: usize,
    pub dim: usize,
    pub num_clusters: usize,
    pub noise: f64,
    /// Roles per cluster; must be at least `num_aspects`.
    pub num_roles: usize,
    pub cluster_scale: f64,
    pub role_scale: f64,
    /// Outgoing citations drawn per paper.
    pub citations_per_paper: usize,
    /// Probability that a citation leaves the citing paper's cluster.
    pub citation_cross_prob: f64,
    pub papers_per_author: usize,
    /// Probability that an authored paper lies in the author's home cluster.
    pub author_affinity: f64,
    /// Author features are `author_cluster_scale * centroid[home] +
    /// author_noise * N(0, I)`.
    pub author_cluster_scale: f64,
    pub author_noise: f64,
    /// Probability that a rule-related pair is emitted as an aspect edge.
    pub pair_keep_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_papers: 200,
            num_authors: 80,
            num_aspects: 4,
            dim: 32,
            num_clusters: 4,
            noise: 1.0,
            num_roles: 8,
            cluster_scale: 0.15,
            role_scale: 1.0,
            citations_per_paper: 1,
            citation_cross_prob: 0.2,
            papers_per_author: 6,
            author_affinity: 0.9,
            author_cluster_scale: 2.0,
            author_noise: 0.5,
            pair_keep_prob: 1.0,
        }
    }
}

impl SynthConfig {
    fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic config: {m}")));
        if self.num_clusters == 0 || self.num_clusters > self.num_papers {
            return fail("need 1 <= num_clusters <= num_papers");
        }
        if self.num_aspects == 0 {
            return fail("num_aspects must be positive");
        }
        if self.num_roles < self.num_aspects {
            return fail("num_roles must be at least num_aspects");
        }
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.num_authors > 0 && self.papers_per_author == 0 {
            return fail("papers_per_author must be positive");
        }
        for (name, p) in [
            ("citation_cross_prob", self.citation_cross_prob),
            ("author_affinity", self.author_affinity),
            ("pair_keep_prob", self.pair_keep_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(&format!("{name} must lie in [0, 1]"));
            }
        }
        if ![self.noise, self.cluster_scale, self.role_scale, self.author_cluster_scale, self.author_noise]
            .iter()
            .all(|v| *v >= 0.0)
        {
            return fail("scales and noise must be non-negative");
        }
        Ok(())
    }

    pub fn cluster_of(&self, paper: usize) -> usize {
        paper % self.num_clusters
    }

    pub fn role_of(&self, paper: usize) -> usize {
        (paper / self.num_clusters) % self.num_roles
    }

    pub fn home_cluster_of_author(&self, author: usize) -> usize {
        author % self.num_clusters
    }

    /// The planted aspect between two papers, if any.
    pub fn planted_aspect(&self, p: usize, q: usize) -> Option<AspectId> {
        if p == q || self.cluster_of(p) != self.cluster_of(q) {
            return None;
        }
        let k = (self.role_of(p) + self.role_of(q)) % self.num_roles;
        (k < self.num_aspects).then_some(AspectId(k))
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Generates a planted graph. The returned edge list is the labeled
/// recommendation set and equals the graph's aspect edges. Output is a pure
/// function of `(cfg, seed)`.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<(HeteroGraph, Vec<AspectEdge>)> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.dim;
    let centroids: Vec<Vec<f64>> = (0..cfg.num_clusters).map(|_| gaussian_vec(&mut rng, d)).collect();
    let roles: Vec<Vec<f64>> = (0..cfg.num_roles).map(|_| gaussian_vec(&mut rng, d)).collect();

    let mut papers = Matrix::zeros(cfg.num_papers, d);
    for p in 0..cfg.num_papers {
        let c = &centroids[cfg.cluster_of(p)];
        let r = &roles[cfg.role_of(p)];
        let row = papers.row_mut(p);
        for j in 0..d {
            let eps: f64 = rng.sample(StandardNormal);
            row[j] = cfg.cluster_scale * c[j] + cfg.role_scale * r[j] + cfg.noise * eps;
        }
    }

    let mut authors = Matrix::zeros(cfg.num_authors, d);
    for a in 0..cfg.num_authors {
        let c = &centroids[cfg.home_cluster_of_author(a)];
        let row = authors.row_mut(a);
        for j in 0..d {
            let eps: f64 = rng.sample(StandardNormal);
            row[j] = cfg.author_cluster_scale * c[j] + cfg.author_noise * eps;
        }
    }

    let members: Vec<Vec<usize>> = (0..cfg.num_clusters)
        .map(|c| (0..cfg.num_papers).filter(|&p| cfg.cluster_of(p) == c).collect())
        .collect();

    let mut citations = Vec::new();
    if cfg.num_papers > 1 {
        for p in 0..cfg.num_papers {
            for _ in 0..cfg.citations_per_paper {
                let pool = &members[cfg.cluster_of(p)];
                let target = if rng.random::<f64>() < cfg.citation_cross_prob || pool.len() < 2 {
                    rng.random_range(0..cfg.num_papers)
                } else {
                    *pool.choose(&mut rng).expect("non-empty cluster")
                };
                if target != p {
                    citations.push((p, target));
                }
            }
        }
    }

    citations.sort_unstable();
    citations.dedup();

    let mut authorships = Vec::new();
    for a in 0..cfg.num_authors {
        let home = &members[cfg.home_cluster_of_author(a)];
        for _ in 0..cfg.papers_per_author {
            let p = if rng.random::<f64>() < cfg.author_affinity {
                *home.choose(&mut rng).expect("non-empty cluster")
            } else {
                rng.random_range(0..cfg.num_papers)
            };
            authorships.push((a, p));
        }
    }
    authorships.sort_unstable();
    authorships.dedup();

    let mut pairs = Vec::new();
    for group in &members {
        for (i, &p) in group.iter().enumerate() {
            for &q in &group[i + 1..] {
                if let Some(k) = cfg.planted_aspect(p, q) {
                    if cfg.pair_keep_prob >= 1.0 || rng.random::<f64>() < cfg.pair_keep_prob {
                        pairs.push(AspectEdge::new(p, q, k));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();

    let names = (0..cfg.num_aspects).map(|k| format!("aspect{k}")).collect();
    let (graph, _) = HeteroGraph::build(papers, authors, &citations, &authorships, &pairs, names)?;
    Ok((graph.with_directed_citations(citations), pairs))
}
