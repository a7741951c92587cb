//! Single-factor ablations against a shared base run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate_with, EvalMode, EvalOptions, EvalReport, FoldSplit, ModelScorer};
use crate::error::{Error, Result};
use crate::graph::{AspectEdge, AspectId, HeteroGraph};
use crate::model::ModelParams;
use crate::sampling::stream;
use crate::training::{train, TrainConfig, TrainingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Drop aspect-`k` pairs from training supervision.
    RemoveAspect(AspectId),
    /// Drop every authorship edge.
    RemoveAuthorship,
    /// Rewire each author's papers to uniformly random distinct papers,
    /// keeping the author's degree.
    RandomizeAuthorship,
    Fanout { paper: usize, author: usize },
    Depth(usize),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::RemoveAspect(k) => write!(f, "remove-aspect:{k}"),
            Variant::RemoveAuthorship => write!(f, "remove-authorship"),
            Variant::RandomizeAuthorship => write!(f, "randomize-authorship"),
            Variant::Fanout { paper, author } => write!(f, "fanout:{paper},{author}"),
            Variant::Depth(l) => write!(f, "depth:{l}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Accepts `remove-aspect:K`, `remove-authorship`, `randomize-authorship`,
    /// `fanout:P,A` and `depth:L`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown ablation variant {s:?}"));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| a.trim().parse::<usize>().map_err(|_| bad());
        match (head.trim().to_lowercase().as_str(), arg) {
            ("remove-aspect", Some(a)) => Ok(Variant::RemoveAspect(AspectId(num(a)?))),
            ("remove-authorship", None) => Ok(Variant::RemoveAuthorship),
            ("randomize-authorship", None) => Ok(Variant::RandomizeAuthorship),
            ("fanout", Some(a)) => {
                let (p, au) = a.split_once(',').ok_or_else(bad)?;
                Ok(Variant::Fanout {
                    paper: num(p)?,
                    author: num(au)?,
                })
            }
            ("depth", Some(a)) => Ok(Variant::Depth(num(a)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub eval: EvalOptions,
    pub k: usize,
    pub mode: EvalMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            eval: EvalOptions::default(),
            k: 10,
            mode: EvalMode::Both,
        }
    }
}

/// Directed training pairs from unordered edges: both orientations.
pub fn training_pairs(edges: &[AspectEdge]) -> Vec<(usize, usize, AspectId)> {
    edges
        .iter()
        .flat_map(|e| [(e.a, e.b, e.aspect), (e.b, e.a, e.aspect)])
        .collect()
}

/// Trains on `supervision` and evaluates on `split` (test relevance, train
/// exclusion).
fn train_and_evaluate(
    g: &HeteroGraph,
    split: &FoldSplit,
    supervision: &[AspectEdge],
    cfg: &ExperimentConfig,
) -> Result<(ModelParams, TrainingLog, EvalReport)> {
    let (params, log) = train(g, &training_pairs(supervision), &cfg.train)?;
    let opts = EvalOptions {
        fanout: cfg.train.fanout,
        ..cfg.eval.clone()
    };
    let scorer = ModelScorer::new(g, &params, &opts.fanout, &opts.policy, opts.general_rule, None)?;
    let report = evaluate_with(
        &scorer,
        g.num_papers(),
        g.aspect_names(),
        &split.test,
        &split.train,
        cfg.k,
        cfg.mode,
        opts.threads,
    )?;
    Ok((params, log, report))
}

/// Trains on a fold's training pairs and evaluates on its test pairs.
pub fn run_fold(
    g: &HeteroGraph,
    split: &FoldSplit,
    cfg: &ExperimentConfig,
) -> Result<(ModelParams, TrainingLog, EvalReport)> {
    train_and_evaluate(g, split, &split.train, cfg)
}

pub fn remove_authorship(g: &HeteroGraph) -> Result<HeteroGraph> {
    g.with_authorships(&[])
}

/// Rewires every author to `degree` distinct papers drawn uniformly.
pub fn randomize_authorship(g: &HeteroGraph, seed: u64) -> Result<HeteroGraph> {
    let mut rng = stream(seed, 0);
    let n = g.num_papers();
    let mut edges = Vec::new();
    for a in 0..g.num_authors() {
        let degree = g.papers_of(a).len().min(n);
        for p in rand::seq::index::sample(&mut rng, n, degree) {
            edges.push((a, p));
        }
    }
    g.with_authorships(&edges)
}

/// The graph, supervision set and configuration a variant runs with. Only the
/// named dimension differs from the base.
pub fn apply_variant(
    g: &HeteroGraph,
    split: &FoldSplit,
    cfg: &ExperimentConfig,
    variant: Variant,
    seed: u64,
) -> Result<(HeteroGraph, Vec<AspectEdge>, ExperimentConfig)> {
    let mut graph = g.clone();
    let mut supervision = split.train.clone();
    let mut cfg = cfg.clone();
    match variant {
        Variant::RemoveAspect(k) => {
            if k.0 >= g.num_aspects() || !split.train.iter().any(|e| e.aspect == k) {
                return Err(Error::UnknownAspect(format!("{k} has no training pairs to remove")));
            }
            supervision.retain(|e| e.aspect != k);
        }
        Variant::RemoveAuthorship => graph = remove_authorship(g)?,
        Variant::RandomizeAuthorship => graph = randomize_authorship(g, seed)?,
        Variant::Fanout { paper, author } => {
            cfg.train.fanout.paper_fanout = paper;
            cfg.train.fanout.author_fanout = author;
            cfg.train.fanout.validate()?;
        }
        Variant::Depth(layers) => {
            if layers == 0 {
                return Err(Error::Config("depth must be at least 1".into()));
            }
            cfg.train.set_num_layers(layers);
        }
    }
    Ok((graph, supervision, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub variant: Variant,
    pub base: EvalReport,
    pub ablated: EvalReport,
}

/// Runs the base configuration once and then every variant, all on the same
/// fold and seed.
pub fn run_ablations(
    base_cfg: &ExperimentConfig,
    variants: &[Variant],
    g: &HeteroGraph,
    split: &FoldSplit,
    seed: u64,
) -> Result<Vec<AblationOutcome>> {
    let (_, _, base) = run_fold(g, split, base_cfg)?;
    variants
        .iter()
        .map(|&variant| {
            Ok(AblationOutcome {
                variant,
                base: base.clone(),
                ablated: run_variant(base_cfg, variant, g, split, seed)?,
            })
        })
        .collect()
}

/// Trains and evaluates one variant; the base run is left to the caller.
pub fn run_variant(
    base_cfg: &ExperimentConfig,
    variant: Variant,
    g: &HeteroGraph,
    split: &FoldSplit,
    seed: u64,
) -> Result<EvalReport> {
    let (graph, supervision, cfg) = apply_variant(g, split, base_cfg, variant, seed)?;
    let (_, _, report) = train_and_evaluate(&graph, split, &supervision, &cfg)?;
    Ok(report)
}

pub fn run_ablation(
    base_cfg: &ExperimentConfig,
    variant: Variant,
    g: &HeteroGraph,
    split: &FoldSplit,
    seed: u64,
) -> Result<AblationOutcome> {
    Ok(run_ablations(base_cfg, &[variant], g, split, seed)?.remove(0))
}
