//! Joint BPR + aspect cross-entropy training.

mod grad;
mod loss;
mod negatives;
mod optim;

pub use grad::{batch_seeds, compute_gradients, gradients_on_sample, loss_on_sample, BatchLoss};
pub use loss::{aspect_ce_grad, aspect_ce_loss, bpr_grad, bpr_loss, sigmoid, softmax, softplus, total_loss};
pub use negatives::{cosine_ranking, mine_hard_negatives, NegativePools};
pub use optim::{Adam, AdamConfig};

use std::time::Instant;

use log::info;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AspectId, HeteroGraph};
use crate::model::{ModelConfig, ModelParams};
use crate::sampling::{stream, FanoutConfig};

/// A `(query, positive, negative, aspect)` quadruple over paper indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainExample {
    pub query: usize,
    pub positive: usize,
    pub negative: usize,
    pub aspect: AspectId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the aspect cross-entropy term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub num_epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub fanout: FanoutConfig,
    pub model: ModelConfig,
    /// Top-cosine candidates kept per query when mining negatives.
    pub negative_pool_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            learning_rate: 1e-3,
            batch_size: 256,
            num_epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            fanout: FanoutConfig::default(),
            model: ModelConfig::default(),
            negative_pool_size: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be a finite non-negative number".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.fanout.validate()?;
        self.model.validate()?;
        if self.model.num_layers() != self.fanout.num_layers {
            return Err(Error::Config(format!(
                "model has {} hidden layers but fanout.num_layers = {}",
                self.model.num_layers(),
                self.fanout.num_layers
            )));
        }
        Ok(())
    }

    /// Rewrites `model.hidden_dims` to `num_layers` entries, reusing the
    /// first width.
    pub fn set_num_layers(&mut self, num_layers: usize) {
        let width = self.model.hidden_dims.first().copied().unwrap_or(256);
        self.model.hidden_dims = vec![width; num_layers];
        self.fanout.num_layers = num_layers;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub rank_loss: f64,
    pub aspect_loss: f64,
    pub total_loss: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// One JSON document per line.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain struct") + "\n")
            .collect()
    }
}

/// Pairs each positive with one negative drawn uniformly from its pool.
pub fn pair_negatives<R: Rng + ?Sized>(
    positives: &[(usize, usize, AspectId)],
    pools: &NegativePools,
    rng: &mut R,
) -> Vec<TrainExample> {
    positives
        .iter()
        .filter_map(|&(query, positive, aspect)| {
            let pool = pools.get(query, aspect)?;
            let negative = *pool.choose(rng)?;
            Some(TrainExample {
                query,
                positive,
                negative,
                aspect,
            })
        })
        .collect()
}

/// Random streams used by [`train`], all derived from `TrainConfig::seed`.
mod streams {
    pub const INIT: u64 = 0;
    pub const LOOP: u64 = 1;
}

/// Trains a fresh model on `train_pairs` (`(query, positive, aspect)`).
pub fn train(
    g: &HeteroGraph,
    train_pairs: &[(usize, usize, AspectId)],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainingLog)> {
    cfg.validate()?;
    let mut init_rng = stream(cfg.seed, streams::INIT);
    let params = ModelParams::init(&cfg.model, g.feature_dim(), g.num_aspects(), &mut init_rng)?;
    train_from(g, train_pairs, cfg, params)
}

/// Continues optimisation from `params`.
pub fn train_from(
    g: &HeteroGraph,
    train_pairs: &[(usize, usize, AspectId)],
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<(ModelParams, TrainingLog)> {
    cfg.validate()?;
    if train_pairs.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    for &(q, p, k) in train_pairs {
        if q == p || q >= g.num_papers() || p >= g.num_papers() {
            return Err(Error::Config(format!("invalid training pair ({q}, {p}, {k})")));
        }
        if k.0 >= g.num_aspects() {
            return Err(Error::UnknownAspect(k.to_string()));
        }
    }

    let pools = mine_hard_negatives(g.paper_features(), train_pairs, cfg.negative_pool_size);
    let mut rng = stream(cfg.seed, streams::LOOP);
    let mut opt = Adam::new(&params, cfg.learning_rate, cfg.adam);
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.num_epochs {
        let started = Instant::now();
        let mut examples = pair_negatives(train_pairs, &pools, &mut rng);
        examples.shuffle(&mut rng);
        let mut sums = BatchLoss::default();
        for (step, batch) in examples.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) =
                match compute_gradients(g, &params, batch, cfg.lambda, &cfg.fanout, &mut rng) {
                    Err(Error::Divergence { detail, .. }) => {
                        return Err(Error::Divergence {
                            epoch,
                            step,
                            detail,
                        })
                    }
                    other => other?,
                };
            let w = batch.len() as f64 / examples.len() as f64;
            sums.rank += loss.rank * w;
            sums.aspect += loss.aspect * w;
            sums.total += loss.total * w;
            opt.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    detail: "parameters became non-finite".into(),
                });
            }
        }
        let entry = EpochLog {
            epoch,
            rank_loss: sums.rank,
            aspect_loss: sums.aspect,
            total_loss: sums.total,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {epoch}: rank {:.5} aspect {:.5} total {:.5}",
            entry.rank_loss, entry.aspect_loss, entry.total_loss
        );
        log.epochs.push(entry);
    }
    Ok((params, log))
}
