//! Heterogeneous paper/author graph: data model, validation, ingestion and a
//! planted synthetic generator.
//!
//! Papers and authors are addressed by dense per-kind indices. Citation and
//! authorship relations are stored as sorted, deduplicated, undirected
//! adjacency lists. Aspect-labeled pairs are kept as a flat triple list; they
//! are supervision only and never used for message passing.

mod io;
mod synth;
mod text;

pub use io::{load_graph, save_graph, Manifest};
pub use synth::{generate_synthetic, SynthConfig};
pub use text::strip_reference_mentions;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Aspect names used by the RiM-style datasets.
pub const RIM_ASPECTS: [&str; 4] = [
    "Specialization/Restriction",
    "Modification/Generalization",
    "Results",
    "Prove/Cases",
];

/// Aspect names used by the PwC-style datasets.
pub const PWC_ASPECTS: [&str; 3] = ["task", "method", "dataset"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Paper,
    Author,
}

/// A node address. Ordering is papers before authors, then by index; this is
/// the accumulation order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeId {
    pub const fn paper(index: usize) -> Self {
        Self {
            kind: NodeKind::Paper,
            index,
        }
    }

    pub const fn author(index: usize) -> Self {
        Self {
            kind: NodeKind::Author,
            index,
        }
    }

    pub fn is_paper(&self) -> bool {
        self.kind == NodeKind::Paper
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NodeKind::Paper => write!(f, "p{}", self.index),
            NodeKind::Author => write!(f, "a{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AspectId(pub usize);

impl fmt::Display for AspectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An aspect-labeled paper pair. `a < b` after normalisation; the pair is
/// unordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AspectEdge {
    pub a: usize,
    pub b: usize,
    pub aspect: AspectId,
}

impl AspectEdge {
    pub fn new(p: usize, q: usize, aspect: AspectId) -> Self {
        Self {
            a: p.min(q),
            b: p.max(q),
            aspect,
        }
    }
}

/// Message-passing relations. Aspect edges are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Citation,
    Authorship,
}

impl Relation {
    pub const ALL: [Relation; 2] = [Relation::Citation, Relation::Authorship];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
    pub location: String,
}

impl ValidationIssue {
    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {} ({})", self.message, self.location)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    paper_features: Matrix,
    author_features: Matrix,
    citation_adj: Vec<Vec<usize>>,
    paper_authors: Vec<Vec<usize>>,
    author_papers: Vec<Vec<usize>>,
    aspect_edges: Vec<AspectEdge>,
    aspect_names: Vec<String>,
    directed_citations: Option<Vec<(usize, usize)>>,
}

impl HeteroGraph {
    /// Builds a graph from edge lists: citations are symmetrised, duplicate
    /// edges are dropped with a warning, and the result is validated.
    ///
    /// Returns the graph together with the non-fatal issues found along the
    /// way. Any error-severity issue aborts construction.
    pub fn build(
        paper_features: Matrix,
        author_features: Matrix,
        citations: &[(usize, usize)],
        authorships: &[(usize, usize)],
        aspect_edges: &[AspectEdge],
        aspect_names: Vec<String>,
    ) -> Result<(Self, Vec<ValidationIssue>)> {
        let num_papers = paper_features.rows();
        let num_authors = author_features.rows();
        if num_authors > 0 && num_papers > 0 && paper_features.cols() != author_features.cols() {
            return Err(Error::DimensionMismatch(format!(
                "paper features have d={} but author features have d={}",
                paper_features.cols(),
                author_features.cols()
            )));
        }
        let mut issues = Vec::new();

        let mut cite_set = BTreeSet::new();
        for &(s, d) in citations {
            if s >= num_papers || d >= num_papers {
                return Err(Error::UnknownNode(format!("citation ({s}, {d})")));
            }
            let key = (s.min(d), s.max(d));
            if !cite_set.insert(key) {
                issues.push(ValidationIssue::warning(
                    format!("citation ({s}, {d})"),
                    "duplicate citation edge dropped",
                ));
            }
        }
        let mut citation_adj = vec![Vec::new(); num_papers];
        for &(s, d) in &cite_set {
            citation_adj[s].push(d);
            if s != d {
                citation_adj[d].push(s);
            }
        }
        citation_adj.iter_mut().for_each(|v| v.sort_unstable());

        let mut auth_set = BTreeSet::new();
        for &(a, p) in authorships {
            if a >= num_authors {
                return Err(Error::UnknownNode(format!("author a{a} in authorship ({a}, {p})")));
            }
            if p >= num_papers {
                return Err(Error::UnknownNode(format!("paper p{p} in authorship ({a}, {p})")));
            }
            if !auth_set.insert((a, p)) {
                issues.push(ValidationIssue::warning(
                    format!("authorship ({a}, {p})"),
                    "duplicate authorship edge dropped",
                ));
            }
        }
        let mut paper_authors = vec![Vec::new(); num_papers];
        let mut author_papers = vec![Vec::new(); num_authors];
        for &(a, p) in &auth_set {
            author_papers[a].push(p);
            paper_authors[p].push(a);
        }
        paper_authors.iter_mut().for_each(|v| v.sort_unstable());

        let mut aspect_set = BTreeSet::new();
        let mut aspects = Vec::new();
        for e in aspect_edges {
            let e = AspectEdge::new(e.a, e.b, e.aspect);
            if e.b >= num_papers {
                return Err(Error::UnknownNode(format!(
                    "aspect edge ({}, {}, {})",
                    e.a, e.b, e.aspect
                )));
            }
            if aspect_set.insert(e) {
                aspects.push(e);
            } else {
                issues.push(ValidationIssue::warning(
                    format!("aspect edge ({}, {}, {})", e.a, e.b, e.aspect),
                    "duplicate aspect edge dropped",
                ));
            }
        }
        aspects.sort_unstable();

        let graph = Self {
            paper_features,
            author_features,
            citation_adj,
            paper_authors,
            author_papers,
            aspect_edges: aspects,
            aspect_names,
            directed_citations: None,
        };
        issues.extend(graph.validate());
        if let Some(first) = issues.iter().find(|i| i.is_error()) {
            return Err(Error::Validation(first.to_string()));
        }
        Ok((graph, issues))
    }

    /// Assembles a graph from adjacency lists without any normalisation or
    /// validation. Intended for callers that already hold canonical data, and
    /// for exercising [`HeteroGraph::validate`].
    pub fn from_parts(
        paper_features: Matrix,
        author_features: Matrix,
        citation_adj: Vec<Vec<usize>>,
        paper_authors: Vec<Vec<usize>>,
        aspect_edges: Vec<AspectEdge>,
        aspect_names: Vec<String>,
    ) -> Self {
        let mut author_papers = vec![Vec::new(); author_features.rows()];
        for (p, authors) in paper_authors.iter().enumerate() {
            for &a in authors {
                if let Some(list) = author_papers.get_mut(a) {
                    list.push(p);
                }
            }
        }
        Self {
            paper_features,
            author_features,
            citation_adj,
            paper_authors,
            author_papers,
            aspect_edges,
            aspect_names,
            directed_citations: None,
        }
    }

    /// Keeps the original citation direction for coupling analyses.
    pub fn with_directed_citations(mut self, edges: Vec<(usize, usize)>) -> Self {
        self.directed_citations = Some(edges);
        self
    }

    pub fn num_papers(&self) -> usize {
        self.paper_features.rows()
    }

    pub fn num_authors(&self) -> usize {
        self.author_features.rows()
    }

    pub fn num_aspects(&self) -> usize {
        self.aspect_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.paper_features.cols()
    }

    pub fn aspect_names(&self) -> &[String] {
        &self.aspect_names
    }

    pub fn paper_features(&self) -> &Matrix {
        &self.paper_features
    }

    pub fn author_features(&self) -> &Matrix {
        &self.author_features
    }

    pub fn features(&self, node: NodeId) -> &[f64] {
        match node.kind {
            NodeKind::Paper => self.paper_features.row(node.index),
            NodeKind::Author => self.author_features.row(node.index),
        }
    }

    pub fn citations(&self, paper: usize) -> &[usize] {
        &self.citation_adj[paper]
    }

    pub fn authors_of(&self, paper: usize) -> &[usize] {
        &self.paper_authors[paper]
    }

    pub fn papers_of(&self, author: usize) -> &[usize] {
        &self.author_papers[author]
    }

    pub fn aspect_edges(&self) -> &[AspectEdge] {
        &self.aspect_edges
    }

    pub fn directed_citations(&self) -> Option<&[(usize, usize)]> {
        self.directed_citations.as_deref()
    }

    /// Neighbours of `node` under `relation`, in ascending id order.
    pub fn neighbors(&self, node: NodeId, relation: Relation) -> Vec<NodeId> {
        match (node.kind, relation) {
            (NodeKind::Paper, Relation::Citation) => self.citation_adj[node.index]
                .iter()
                .map(|&p| NodeId::paper(p))
                .collect(),
            (NodeKind::Paper, Relation::Authorship) => self.paper_authors[node.index]
                .iter()
                .map(|&a| NodeId::author(a))
                .collect(),
            (NodeKind::Author, Relation::Authorship) => self.author_papers[node.index]
                .iter()
                .map(|&p| NodeId::paper(p))
                .collect(),
            (NodeKind::Author, Relation::Citation) => Vec::new(),
        }
    }

    pub fn degree(&self, node: NodeId, relation: Relation) -> usize {
        match (node.kind, relation) {
            (NodeKind::Paper, Relation::Citation) => self.citation_adj[node.index].len(),
            (NodeKind::Paper, Relation::Authorship) => self.paper_authors[node.index].len(),
            (NodeKind::Author, Relation::Authorship) => self.author_papers[node.index].len(),
            (NodeKind::Author, Relation::Citation) => 0,
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        match node.kind {
            NodeKind::Paper => node.index < self.num_papers(),
            NodeKind::Author => node.index < self.num_authors(),
        }
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId, relation: Relation) -> bool {
        match (a.kind, b.kind, relation) {
            (NodeKind::Paper, NodeKind::Paper, Relation::Citation) => {
                self.citation_adj[a.index].binary_search(&b.index).is_ok()
            }
            (NodeKind::Paper, NodeKind::Author, Relation::Authorship) => {
                self.paper_authors[a.index].binary_search(&b.index).is_ok()
            }
            (NodeKind::Author, NodeKind::Paper, Relation::Authorship) => {
                self.paper_authors[b.index].binary_search(&a.index).is_ok()
            }
            _ => false,
        }
    }

    pub fn num_citation_edges(&self) -> usize {
        let loops = self
            .citation_adj
            .iter()
            .enumerate()
            .filter(|(p, n)| n.contains(p))
            .count();
        (self.citation_adj.iter().map(Vec::len).sum::<usize>() + loops) / 2
    }

    /// Authorship edges as `(author, paper)` pairs, ordered by author then paper.
    pub fn authorship_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .paper_authors
            .iter()
            .enumerate()
            .flat_map(|(p, authors)| authors.iter().map(move |&a| (a, p)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Citation edges as `(low, high)` pairs, each undirected edge once.
    pub fn citation_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (p, list) in self.citation_adj.iter().enumerate() {
            for &q in list {
                if p <= q {
                    out.push((p, q));
                }
            }
        }
        out
    }

    /// Returns a copy with the authorship relation replaced.
    pub fn with_authorships(&self, authorships: &[(usize, usize)]) -> Result<Self> {
        let (mut g, _) = Self::build(
            self.paper_features.clone(),
            self.author_features.clone(),
            &self.citation_edges(),
            authorships,
            &self.aspect_edges,
            self.aspect_names.clone(),
        )?;
        g.directed_citations = self.directed_citations.clone();
        Ok(g)
    }

    /// Resolves an aspect by index or case-insensitive name.
    pub fn resolve_aspect(&self, name: &str) -> Result<AspectId> {
        if let Ok(i) = name.trim().parse::<usize>() {
            if i < self.num_aspects() {
                return Ok(AspectId(i));
            }
            return Err(Error::UnknownAspect(name.to_string()));
        }
        let wanted = name.trim().to_lowercase();
        self.aspect_names
            .iter()
            .position(|n| n.to_lowercase() == wanted)
            .map(AspectId)
            .ok_or_else(|| Error::UnknownAspect(name.to_string()))
    }

    /// Checks every structural invariant and reports all violations.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        validate_graph(self)
    }
}

/// Returns every invariant violation in `g`. An empty result means the graph
/// is well formed.
pub fn validate_graph(g: &HeteroGraph) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let np = g.num_papers();
    let na = g.num_authors();

    if g.aspect_names.is_empty() {
        issues.push(ValidationIssue::error("aspects", "graph declares no aspects"));
    }
    if np > 0 && na > 0 && g.paper_features.cols() != g.author_features.cols() {
        issues.push(ValidationIssue::error(
            "features",
            format!(
                "dimension mismatch: papers d={}, authors d={}",
                g.paper_features.cols(),
                g.author_features.cols()
            ),
        ));
    }
    for (kind, m) in [("paper", &g.paper_features), ("author", &g.author_features)] {
        for i in 0..m.rows() {
            if m.row(i).iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::error(
                    format!("{kind} {i}"),
                    "non-finite feature value",
                ));
            }
        }
    }

    if g.citation_adj.len() != np {
        issues.push(ValidationIssue::error(
            "citations",
            "citation adjacency does not cover every paper",
        ));
    }
    for (p, list) in g.citation_adj.iter().enumerate() {
        for &q in list {
            if q >= np {
                issues.push(ValidationIssue::error(
                    format!("citation ({p}, {q})"),
                    "endpoint is not a valid paper",
                ));
            } else if q == p {
                issues.push(ValidationIssue::error(
                    format!("citation ({p}, {p})"),
                    "self-loop citation",
                ));
            } else if !g.citation_adj[q].contains(&p) {
                issues.push(ValidationIssue::error(
                    format!("citation ({p}, {q})"),
                    "citation adjacency is not symmetric",
                ));
            }
        }
    }

    if g.paper_authors.len() != np {
        issues.push(ValidationIssue::error(
            "authorship",
            "authorship adjacency does not cover every paper",
        ));
    }
    for (p, authors) in g.paper_authors.iter().enumerate() {
        for &a in authors {
            if a >= na {
                issues.push(ValidationIssue::error(
                    format!("authorship ({a}, {p})"),
                    "endpoint is not a valid author",
                ));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for e in &g.aspect_edges {
        let loc = format!("aspect edge ({}, {}, {})", e.a, e.b, e.aspect);
        if e.a >= np || e.b >= np {
            issues.push(ValidationIssue::error(&loc, "endpoint is not a valid paper"));
        }
        if e.a == e.b {
            issues.push(ValidationIssue::error(&loc, "aspect edge joins a paper to itself"));
        }
        if e.aspect.0 >= g.num_aspects() {
            issues.push(ValidationIssue::error(
                &loc,
                format!("aspect index out of range (num_aspects = {})", g.num_aspects()),
            ));
        }
        let key = AspectEdge::new(e.a, e.b, e.aspect);
        if !seen.insert(key) {
            issues.push(ValidationIssue::error(&loc, "duplicate aspect edge"));
        }
    }
    issues
}
