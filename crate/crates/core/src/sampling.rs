//! Fixed-fanout neighbourhood sampling and layered computation sets.
//!
//! A [`LayeredSample`] for `L` message-passing layers holds `L + 1` active
//! node sets. `layers[L]` is the seed set; `layers[l]` is `layers[l + 1]`
//! plus every neighbour sampled for it. `blocks[l]` describes, for each node
//! of `layers[l + 1]`, where its own and its neighbours' layer-`l` states
//! live inside `layers[l]`.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeId, NodeKind, Relation};

/// Generator used for every random stream in the crate.
pub type SampleRng = ChaCha8Rng;

/// Independent stream `index` derived from `base_seed` (worker `i` uses
/// `base_seed + i`).
pub fn stream(base_seed: u64, index: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanoutConfig {
    /// Cap on sampled paper neighbours per node, relation and layer.
    pub paper_fanout: usize,
    /// Cap on sampled author neighbours per node and layer.
    pub author_fanout: usize,
    pub num_layers: usize,
}

impl Default for FanoutConfig {
    fn default() -> Self {
        Self {
            paper_fanout: 15,
            author_fanout: 5,
            num_layers: 2,
        }
    }
}

impl FanoutConfig {
    /// A configuration whose caps exceed every degree.
    pub fn unbounded(num_layers: usize) -> Self {
        Self {
            paper_fanout: usize::MAX,
            author_fanout: usize::MAX,
            num_layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paper_fanout == 0 || self.author_fanout == 0 || self.num_layers == 0 {
            return Err(Error::Config(
                "fanouts and num_layers must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The cap that applies to `node`'s neighbours under `relation`; it is
    /// chosen by the kind of the neighbour.
    pub fn fanout_for(&self, node: NodeId, relation: Relation) -> usize {
        match (node.kind, relation) {
            (NodeKind::Paper, Relation::Authorship) => self.author_fanout,
            _ => self.paper_fanout,
        }
    }
}

/// When to replace sampling by exact aggregation at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferencePolicy {
    /// Graphs with at most this many papers use full neighbourhoods.
    pub full_neighborhood_max_papers: usize,
    /// Seed of the fixed sample used above the threshold.
    pub seed: u64,
}

impl Default for InferencePolicy {
    fn default() -> Self {
        Self {
            full_neighborhood_max_papers: 100_000,
            seed: 0,
        }
    }
}

/// Samples up to `fanout` distinct neighbours of `v` uniformly without
/// replacement. When the degree does not exceed the cap every neighbour is
/// returned and `rng` is left untouched. The result is sorted by id.
pub fn sample_neighbors<R: Rng + ?Sized>(
    g: &HeteroGraph,
    v: NodeId,
    relation: Relation,
    fanout: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let all = g.neighbors(v, relation);
    if all.len() <= fanout {
        return all;
    }
    let mut picked: Vec<NodeId> = rand::seq::index::sample(rng, all.len(), fanout)
        .into_iter()
        .map(|i| all[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Where one target's inputs live in the layer below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub self_index: usize,
    /// Neighbour indices per relation, in [`Relation::ALL`] order, ascending.
    pub neighbors: [Vec<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredSample {
    layers: Vec<Vec<NodeId>>,
    blocks: Vec<Vec<Aggregation>>,
}

impl LayeredSample {
    pub fn num_layers(&self) -> usize {
        self.blocks.len()
    }

    /// Active nodes at depth `l`, ascending.
    pub fn layer(&self, l: usize) -> &[NodeId] {
        &self.layers[l]
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.layers[self.layers.len() - 1]
    }

    /// Aggregation plan feeding layer `l + 1`, aligned with `layer(l + 1)`.
    pub fn block(&self, l: usize) -> &[Aggregation] {
        &self.blocks[l]
    }

    pub fn position(&self, l: usize, node: NodeId) -> Option<usize> {
        self.layers[l].binary_search(&node).ok()
    }

    /// Sampled edges feeding layer `l + 1` as `(target, relation, source)`.
    pub fn edges(&self, l: usize) -> Vec<(NodeId, Relation, NodeId)> {
        let mut out = Vec::new();
        for (t, agg) in self.layers[l + 1].iter().zip(&self.blocks[l]) {
            for (r, list) in Relation::ALL.iter().zip(&agg.neighbors) {
                out.extend(list.iter().map(|&u| (*t, *r, self.layers[l][u])));
            }
        }
        out
    }
}

/// Expands `seeds` through `cfg.num_layers` rounds of per-relation sampling.
pub fn build_layered_sample<R: Rng + ?Sized>(
    g: &HeteroGraph,
    seeds: &[NodeId],
    cfg: &FanoutConfig,
    rng: &mut R,
) -> Result<LayeredSample> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("layered sample needs at least one seed".into()));
    }
    if let Some(bad) = seeds.iter().find(|s| !g.contains(**s)) {
        return Err(Error::UnknownNode(bad.to_string()));
    }
    let depth = cfg.num_layers;
    let mut top: Vec<NodeId> = seeds.to_vec();
    top.sort_unstable();
    top.dedup();

    let mut layers = vec![Vec::new(); depth + 1];
    let mut raw_blocks: Vec<Vec<[Vec<NodeId>; 2]>> = vec![Vec::new(); depth];
    layers[depth] = top;
    for l in (0..depth).rev() {
        let mut active: BTreeSet<NodeId> = layers[l + 1].iter().copied().collect();
        let mut block = Vec::with_capacity(layers[l + 1].len());
        for &t in &layers[l + 1] {
            let sampled = Relation::ALL
                .map(|r| sample_neighbors(g, t, r, cfg.fanout_for(t, r), rng));
            active.extend(sampled.iter().flatten().copied());
            block.push(sampled);
        }
        layers[l] = active.into_iter().collect();
        raw_blocks[l] = block;
    }

    let blocks = raw_blocks
        .into_iter()
        .enumerate()
        .map(|(l, block)| {
            let below = &layers[l];
            let index = |n: &NodeId| below.binary_search(n).expect("node present in lower layer");
            layers[l + 1]
                .iter()
                .zip(block)
                .map(|(t, lists)| Aggregation {
                    self_index: index(t),
                    neighbors: lists.map(|list| list.iter().map(index).collect()),
                })
                .collect()
        })
        .collect();
    Ok(LayeredSample { layers, blocks })
}

/// Inference-time sample: exact neighbourhoods on graphs within the policy
/// threshold, otherwise one fixed seeded sample.
pub fn build_inference_sample(
    g: &HeteroGraph,
    seeds: &[NodeId],
    cfg: &FanoutConfig,
    policy: &InferencePolicy,
) -> Result<LayeredSample> {
    if g.num_papers() <= policy.full_neighborhood_max_papers {
        build_layered_sample(g, seeds, &FanoutConfig::unbounded(cfg.num_layers), &mut stream(policy.seed, 0))
    } else {
        build_layered_sample(g, seeds, cfg, &mut stream(policy.seed, 0))
    }
}
