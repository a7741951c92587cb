//! Reverse-mode gradients of the joint objective.
//!
//! The sampled subgraph is held fixed; gradients flow from the BPR term into
//! the scorer, the aspect table and the encoder, and from the cross-entropy
//! term into the classifier and the encoder.

use rand::Rng;

use super::loss::{aspect_ce_grad, aspect_ce_loss, bpr_grad, bpr_loss};
use super::TrainExample;
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeId};
use crate::linalg::axpy;
use crate::model::{
    encode_trace, interaction_vector, mlp_forward, EncoderTrace, Gradients, Mlp, MlpTrace, ModelParams,
};
use crate::sampling::{build_layered_sample, FanoutConfig, LayeredSample};

/// Mean losses over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    pub rank: f64,
    pub aspect: f64,
    pub total: f64,
}

/// Seeds needed to score a batch: every query, positive and negative paper.
pub fn batch_seeds(batch: &[TrainExample]) -> Vec<NodeId> {
    let mut seeds: Vec<NodeId> = batch
        .iter()
        .flat_map(|e| [e.query, e.positive, e.negative])
        .map(NodeId::paper)
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
}

/// Samples fresh neighbourhoods for the batch and differentiates the mean
/// joint loss.
pub fn compute_gradients<R: Rng + ?Sized>(
    g: &HeteroGraph,
    params: &ModelParams,
    batch: &[TrainExample],
    lambda: f64,
    fanout: &FanoutConfig,
    rng: &mut R,
) -> Result<(BatchLoss, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Config("empty training batch".into()));
    }
    let sample = build_layered_sample(g, &batch_seeds(batch), fanout, rng)?;
    gradients_on_sample(g, params, batch, lambda, &sample)
}

/// Backward pass through `relu(W_hidden z + b_hidden)` and the output layer.
/// Accumulates parameter gradients into `grads` and returns `∂/∂z`.
fn mlp_backward(mlp: &Mlp, z: &[f64], trace: &MlpTrace, d_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
    axpy(1.0, d_out, &mut grads.out_bias);
    grads.out_weight.add_outer(1.0, d_out, &trace.hidden);
    let mut d_hidden = vec![0.0; trace.hidden.len()];
    mlp.out_weight.matvec_t_acc(d_out, &mut d_hidden);
    for (dh, h) in d_hidden.iter_mut().zip(&trace.hidden) {
        if *h <= 0.0 {
            *dh = 0.0;
        }
    }
    axpy(1.0, &d_hidden, &mut grads.hidden_bias);
    grads.hidden_weight.add_outer(1.0, &d_hidden, z);
    let mut dz = vec![0.0; z.len()];
    mlp.hidden_weight.matvec_t_acc(&d_hidden, &mut dz);
    dz
}

/// Splits `∂/∂[h_q ‖ h_c ‖ h_q ⊙ h_c ‖ …]` into the two embedding gradients.
fn scatter_interaction(dz: &[f64], h_q: &[f64], h_c: &[f64], d_q: &mut [f64], d_c: &mut [f64]) {
    let d = h_q.len();
    axpy(1.0, &dz[..d], d_q);
    axpy(1.0, &dz[d..2 * d], d_c);
    for j in 0..d {
        let dp = dz[2 * d + j];
        d_q[j] += dp * h_c[j];
        d_c[j] += dp * h_q[j];
    }
}

fn encoder_backward(
    params: &ModelParams,
    sample: &LayeredSample,
    trace: &EncoderTrace,
    top_grads: Vec<Vec<f64>>,
    grads: &mut ModelParams,
) {
    let depth = params.num_layers();
    let mut upper = top_grads;
    for l in (0..depth).rev() {
        let layer = &params.layers[l];
        let below = &trace.states[l];
        let d_in = layer.self_weight.cols();
        let mut lower = if l > 0 {
            vec![vec![0.0; d_in]; below.len()]
        } else {
            Vec::new()
        };
        for (i, agg) in sample.block(l).iter().enumerate() {
            let mut g_pre = std::mem::take(&mut upper[i]);
            for (gp, h) in g_pre.iter_mut().zip(&trace.states[l + 1][i]) {
                if *h <= 0.0 {
                    *gp = 0.0;
                }
            }
            if g_pre.iter().all(|v| *v == 0.0) {
                continue;
            }
            grads.layers[l].self_weight.add_outer(1.0, &g_pre, &below[agg.self_index]);
            if l > 0 {
                layer.self_weight.matvec_t_acc(&g_pre, &mut lower[agg.self_index]);
            }
            for (r, list) in agg.neighbors.iter().enumerate() {
                let Some(mean) = &trace.means[l][i][r] else {
                    continue;
                };
                grads.layers[l].relation_weights[r].add_outer(1.0, &g_pre, mean);
                if l > 0 {
                    let mut d_mean = vec![0.0; d_in];
                    layer.relation_weights[r].matvec_t_acc(&g_pre, &mut d_mean);
                    let inv = 1.0 / list.len() as f64;
                    for &u in list {
                        axpy(inv, &d_mean, &mut lower[u]);
                    }
                }
            }
        }
        upper = lower;
    }
}

/// Mean joint loss and its exact gradient for a fixed sample. `sample` must
/// contain every paper referenced by `batch` among its seeds.
pub fn gradients_on_sample(
    g: &HeteroGraph,
    params: &ModelParams,
    batch: &[TrainExample],
    lambda: f64,
    sample: &LayeredSample,
) -> Result<(BatchLoss, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Config("empty training batch".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config("lambda must be non-negative".into()));
    }
    let trace = encode_trace(g, params, sample)?;
    let top = trace.states.last().expect("final layer");
    let d = params.embedding_dim();
    let depth = params.num_layers();
    let pos = |p: usize| -> Result<usize> {
        sample
            .position(depth, NodeId::paper(p))
            .ok_or_else(|| Error::UnknownNode(format!("p{p} is not a sample seed")))
    };

    let mut grads = params.zeros_like();
    let mut top_grads = vec![vec![0.0; d]; top.len()];
    let scale = 1.0 / batch.len() as f64;
    let mut loss = BatchLoss::default();

    for ex in batch {
        if ex.aspect.0 >= params.num_aspects() {
            return Err(Error::UnknownAspect(ex.aspect.to_string()));
        }
        let (iq, ip, ineg) = (pos(ex.query)?, pos(ex.positive)?, pos(ex.negative)?);
        let (h_q, h_p, h_n) = (&top[iq], &top[ip], &top[ineg]);
        let e_as = params.aspect_table.row(ex.aspect.0);

        let z_pos = interaction_vector(h_q, h_p, Some(e_as))?;
        let z_neg = interaction_vector(h_q, h_n, Some(e_as))?;
        let t_pos = mlp_forward(&params.scorer, &z_pos);
        let t_neg = mlp_forward(&params.scorer, &z_neg);
        let (s_pos, s_neg) = (t_pos.output[0], t_neg.output[0]);
        let rank = bpr_loss(s_pos, s_neg);

        // Aspect supervision uses the positive pair only.
        let z_cls = interaction_vector(h_q, h_p, None)?;
        let t_cls = mlp_forward(&params.classifier, &z_cls);
        let aspect = aspect_ce_loss(&t_cls.output, ex.aspect)?;
        if !rank.is_finite() || !aspect.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                step: 0,
                detail: format!(
                    "non-finite loss for example (q={}, +={}, -={}, aspect={})",
                    ex.query, ex.positive, ex.negative, ex.aspect
                ),
            });
        }
        loss.rank += rank * scale;
        loss.aspect += aspect * scale;

        let (mut dq, mut dp, mut dn) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let ds = bpr_grad(s_pos, s_neg) * scale;
        for (z, t, h_c, d_c, sign) in [
            (&z_pos, &t_pos, h_p, &mut dp, 1.0),
            (&z_neg, &t_neg, h_n, &mut dn, -1.0),
        ] {
            let dz = mlp_backward(&params.scorer, z, t, &[sign * ds], &mut grads.scorer);
            scatter_interaction(&dz, h_q, h_c, &mut dq, d_c);
            axpy(1.0, &dz[3 * d..], grads.aspect_table.row_mut(ex.aspect.0));
        }
        if lambda != 0.0 {
            let mut d_logits = aspect_ce_grad(&t_cls.output, ex.aspect);
            d_logits.iter_mut().for_each(|v| *v *= lambda * scale);
            let dz = mlp_backward(&params.classifier, &z_cls, &t_cls, &d_logits, &mut grads.classifier);
            scatter_interaction(&dz, h_q, h_p, &mut dq, &mut dp);
        }
        axpy(1.0, &dq, &mut top_grads[iq]);
        axpy(1.0, &dp, &mut top_grads[ip]);
        axpy(1.0, &dn, &mut top_grads[ineg]);
    }
    loss.total = loss.rank + lambda * loss.aspect;

    encoder_backward(params, sample, &trace, top_grads, &mut grads);
    let grads = Gradients(grads);
    if !grads.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            step: 0,
            detail: "non-finite gradient".into(),
        });
    }
    Ok((loss, grads))
}

/// Mean joint loss for a fixed sample, without gradients.
pub fn loss_on_sample(
    g: &HeteroGraph,
    params: &ModelParams,
    batch: &[TrainExample],
    lambda: f64,
    sample: &LayeredSample,
) -> Result<BatchLoss> {
    let trace = encode_trace(g, params, sample)?;
    let top = trace.states.last().expect("final layer");
    let depth = params.num_layers();
    let h = |p: usize| -> Result<&[f64]> {
        sample
            .position(depth, NodeId::paper(p))
            .map(|i| top[i].as_slice())
            .ok_or_else(|| Error::UnknownNode(format!("p{p} is not a sample seed")))
    };
    let scale = 1.0 / batch.len() as f64;
    let mut loss = BatchLoss::default();
    for ex in batch {
        let e_as = params.aspect_table.row(ex.aspect.0);
        let s_pos = mlp_forward(&params.scorer, &interaction_vector(h(ex.query)?, h(ex.positive)?, Some(e_as))?).output[0];
        let s_neg = mlp_forward(&params.scorer, &interaction_vector(h(ex.query)?, h(ex.negative)?, Some(e_as))?).output[0];
        let logits = mlp_forward(&params.classifier, &interaction_vector(h(ex.query)?, h(ex.positive)?, None)?).output;
        loss.rank += bpr_loss(s_pos, s_neg) * scale;
        loss.aspect += aspect_ce_loss(&logits, ex.aspect)? * scale;
    }
    loss.total = loss.rank + lambda * loss.aspect;
    Ok(loss)
}
