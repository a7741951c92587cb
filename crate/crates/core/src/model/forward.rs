use super::{Mlp, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{AspectId, HeteroGraph, NodeId};
use crate::linalg::{axpy, relu_in_place};
use crate::sampling::LayeredSample;

/// Intermediate states of one encoder pass, kept for back-propagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// `states[l][i]` is `h^(l)` of `sample.layer(l)[i]`; `states[0]` holds the
    /// raw features.
    pub states: Vec<Vec<Vec<f64>>>,
    /// Per target of layer `l + 1`: the neighbour mean per relation, `None`
    /// when the sampled neighbourhood is empty.
    pub means: Vec<Vec<[Option<Vec<f64>>; 2]>>,
}

/// Final-layer embeddings of a sample's seed set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    nodes: Vec<NodeId>,
    values: Vec<Vec<f64>>,
}

impl Embeddings {
    pub fn get(&self, node: NodeId) -> Option<&[f64]> {
        self.nodes
            .binary_search(&node)
            .ok()
            .map(|i| self.values[i].as_slice())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.nodes.iter().copied().zip(self.values.iter().map(Vec::as_slice))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Runs every message-passing layer over `sample` and keeps all states.
pub fn encode_trace(
    g: &HeteroGraph,
    params: &ModelParams,
    sample: &LayeredSample,
) -> Result<EncoderTrace> {
    params.check_shapes()?;
    if g.feature_dim() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "graph features have d={} but the model expects {}",
            g.feature_dim(),
            params.input_dim()
        )));
    }
    if sample.num_layers() != params.num_layers() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} layers but the model has {}",
            sample.num_layers(),
            params.num_layers()
        )));
    }

    let inputs: Vec<Vec<f64>> = sample.layer(0).iter().map(|n| g.features(*n).to_vec()).collect();
    let mut states = vec![inputs];
    let mut means = Vec::with_capacity(params.num_layers());
    for (l, layer) in params.layers.iter().enumerate() {
        let below = &states[l];
        let d_in = layer.self_weight.cols();
        let mut outs = Vec::with_capacity(sample.block(l).len());
        let mut layer_means = Vec::with_capacity(sample.block(l).len());
        for agg in sample.block(l) {
            let mut out = layer.self_weight.matvec(&below[agg.self_index]);
            let mut per_rel: [Option<Vec<f64>>; 2] = [None, None];
            for (r, list) in agg.neighbors.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                // Indices are ascending, so accumulation order is by node id.
                let mut mean = vec![0.0; d_in];
                for &u in list {
                    axpy(1.0, &below[u], &mut mean);
                }
                let inv = 1.0 / list.len() as f64;
                mean.iter_mut().for_each(|v| *v *= inv);
                layer.relation_weights[r].matvec_acc(&mean, &mut out);
                per_rel[r] = Some(mean);
            }
            relu_in_place(&mut out);
            outs.push(out);
            layer_means.push(per_rel);
        }
        states.push(outs);
        means.push(layer_means);
    }
    Ok(EncoderTrace { states, means })
}

/// Final embeddings `h^(L)` for the seed set of `sample`.
pub fn encode(g: &HeteroGraph, params: &ModelParams, sample: &LayeredSample) -> Result<Embeddings> {
    let mut trace = encode_trace(g, params, sample)?;
    let values = trace.states.pop().expect("at least the input layer");
    Ok(Embeddings {
        nodes: sample.seeds().to_vec(),
        values,
    })
}

/// `[h_q ‖ h_c ‖ h_q ⊙ h_c]`, followed by `e_as` when given.
pub fn interaction_vector(h_q: &[f64], h_c: &[f64], aspect: Option<&[f64]>) -> Result<Vec<f64>> {
    if h_q.len() != h_c.len() {
        return Err(Error::DimensionMismatch(format!(
            "query embedding has {} entries, candidate {}",
            h_q.len(),
            h_c.len()
        )));
    }
    let extra = aspect.map_or(0, <[f64]>::len);
    let mut z = Vec::with_capacity(3 * h_q.len() + extra);
    z.extend_from_slice(h_q);
    z.extend_from_slice(h_c);
    z.extend(h_q.iter().zip(h_c).map(|(a, b)| a * b));
    if let Some(e) = aspect {
        z.extend_from_slice(e);
    }
    Ok(z)
}

/// Activations of one two-layer perceptron pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) fn mlp_forward(mlp: &Mlp, z: &[f64]) -> MlpTrace {
    let mut hidden = mlp.hidden_weight.matvec(z);
    axpy(1.0, &mlp.hidden_bias, &mut hidden);
    relu_in_place(&mut hidden);
    let mut output = mlp.out_weight.matvec(&hidden);
    axpy(1.0, &mlp.out_bias, &mut output);
    MlpTrace { hidden, output }
}

/// Scalar relevance of an aspect-conditioned interaction vector.
pub fn score(params: &ModelParams, z: &[f64]) -> Result<f64> {
    if z.len() != params.scorer.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "scorer expects {} inputs, got {}",
            params.scorer.input_dim(),
            z.len()
        )));
    }
    Ok(mlp_forward(&params.scorer, z).output[0])
}

/// `score` for a query/candidate embedding pair under `aspect`.
pub fn score_pair(params: &ModelParams, h_q: &[f64], h_c: &[f64], aspect: AspectId) -> Result<f64> {
    if aspect.0 >= params.num_aspects() {
        return Err(Error::UnknownAspect(aspect.to_string()));
    }
    let z = interaction_vector(h_q, h_c, Some(params.aspect_table.row(aspect.0)))?;
    score(params, &z)
}

/// Aspect logits for a pair.
pub fn predict_aspect(params: &ModelParams, h_q: &[f64], h_c: &[f64]) -> Result<Vec<f64>> {
    let z = interaction_vector(h_q, h_c, None)?;
    if z.len() != params.classifier.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "classifier expects {} inputs, got {}",
            params.classifier.input_dim(),
            z.len()
        )));
    }
    Ok(mlp_forward(&params.classifier, &z).output)
}
