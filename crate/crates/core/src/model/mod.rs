//! Model parameters and the forward computation.
//!
//! The encoder applies `L` layers of relation-typed mean aggregation over
//! citation and authorship neighbourhoods. Scoring concatenates the two final
//! paper embeddings, their element-wise product and an aspect embedding, and
//! feeds the result through a two-layer perceptron. The auxiliary aspect
//! classifier sees the same interaction without the aspect embedding.

mod checkpoint;
mod forward;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use forward::{
    encode, encode_trace, interaction_vector, predict_aspect, score, score_pair, Embeddings,
    EncoderTrace, MlpTrace,
};
pub(crate) use forward::mlp_forward;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Output width of each message-passing layer; its length is `L`.
    pub hidden_dims: Vec<usize>,
    pub aspect_dim: usize,
    pub scorer_hidden: usize,
    pub classifier_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![256, 256],
            aspect_dim: 64,
            scorer_hidden: 128,
            classifier_hidden: 128,
        }
    }
}

impl ModelConfig {
    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len()
    }

    /// Same widths for every layer.
    pub fn uniform(num_layers: usize, hidden: usize, aspect_dim: usize, mlp_hidden: usize) -> Self {
        Self {
            hidden_dims: vec![hidden; num_layers],
            aspect_dim,
            scorer_hidden: mlp_hidden,
            classifier_hidden: mlp_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden_dims must be non-empty and positive".into()));
        }
        if self.aspect_dim == 0 || self.scorer_hidden == 0 || self.classifier_hidden == 0 {
            return Err(Error::Config("aspect_dim and MLP widths must be positive".into()));
        }
        Ok(())
    }
}

/// Weights of one message-passing layer; every matrix is `d_out × d_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub self_weight: Matrix,
    /// Indexed in [`crate::graph::Relation::ALL`] order.
    pub relation_weights: [Matrix; 2],
}

/// `ŷ = W_out relu(W_hidden z + b_hidden) + b_out`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden_weight: Matrix,
    pub hidden_bias: Vec<f64>,
    pub out_weight: Matrix,
    pub out_bias: Vec<f64>,
}

impl Mlp {
    fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            hidden_weight: Matrix::glorot(hidden, input, rng),
            hidden_bias: vec![0.0; hidden],
            out_weight: Matrix::glorot(output, hidden, rng),
            out_bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.out_weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    /// Row `k` is the embedding of aspect `k`.
    pub aspect_table: Matrix,
    /// Maps `[h_q ‖ h_c ‖ h_q ⊙ h_c ‖ e_as]` to a scalar score.
    pub scorer: Mlp,
    /// Maps `[h_q ‖ h_c ‖ h_q ⊙ h_c]` to one logit per aspect.
    pub classifier: Mlp,
}

/// A named view of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub data: &'a mut [f64],
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        feature_dim: usize,
        num_aspects: usize,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if feature_dim == 0 || num_aspects == 0 {
            return Err(Error::Config("feature_dim and num_aspects must be positive".into()));
        }
        let mut layers = Vec::with_capacity(cfg.num_layers());
        let mut d_in = feature_dim;
        for &d_out in &cfg.hidden_dims {
            layers.push(LayerParams {
                self_weight: Matrix::glorot(d_out, d_in, rng),
                relation_weights: [Matrix::glorot(d_out, d_in, rng), Matrix::glorot(d_out, d_in, rng)],
            });
            d_in = d_out;
        }
        let d_l = d_in;
        Ok(Self {
            layers,
            aspect_table: Matrix::glorot(num_aspects, cfg.aspect_dim, rng),
            scorer: Mlp::init(3 * d_l + cfg.aspect_dim, cfg.scorer_hidden, 1, rng),
            classifier: Mlp::init(3 * d_l, cfg.classifier_hidden, num_aspects, rng),
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_aspects(&self) -> usize {
        self.aspect_table.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].self_weight.cols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.self_weight.rows())
    }

    pub fn aspect_dim(&self) -> usize {
        self.aspect_table.cols()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            hidden_dims: self.layers.iter().map(|l| l.self_weight.rows()).collect(),
            aspect_dim: self.aspect_dim(),
            scorer_hidden: self.scorer.hidden_weight.rows(),
            classifier_hidden: self.classifier.hidden_weight.rows(),
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.fill(0.0);
        }
        z
    }

    /// Every tensor in a fixed order with a stable name.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        fn mat(name: String, m: &Matrix) -> TensorRef<'_> {
            TensorRef {
                name,
                shape: m.shape(),
                data: m.as_slice(),
            }
        }
        fn vec(name: String, v: &[f64]) -> TensorRef<'_> {
            TensorRef {
                name,
                shape: (v.len(), 1),
                data: v,
            }
        }
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(mat(format!("layer{l}.self_weight"), &layer.self_weight));
            out.push(mat(format!("layer{l}.citation_weight"), &layer.relation_weights[0]));
            out.push(mat(format!("layer{l}.authorship_weight"), &layer.relation_weights[1]));
        }
        out.push(mat("aspect_table".into(), &self.aspect_table));
        for (prefix, mlp) in [("scorer", &self.scorer), ("classifier", &self.classifier)] {
            out.push(mat(format!("{prefix}.hidden_weight"), &mlp.hidden_weight));
            out.push(vec(format!("{prefix}.hidden_bias"), &mlp.hidden_bias));
            out.push(mat(format!("{prefix}.out_weight"), &mlp.out_weight));
            out.push(vec(format!("{prefix}.out_bias"), &mlp.out_bias));
        }
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let [cite, auth] = &mut layer.relation_weights;
            out.push(TensorMut {
                name: format!("layer{l}.self_weight"),
                data: layer.self_weight.as_mut_slice(),
            });
            out.push(TensorMut {
                name: format!("layer{l}.citation_weight"),
                data: cite.as_mut_slice(),
            });
            out.push(TensorMut {
                name: format!("layer{l}.authorship_weight"),
                data: auth.as_mut_slice(),
            });
        }
        out.push(TensorMut {
            name: "aspect_table".into(),
            data: self.aspect_table.as_mut_slice(),
        });
        for (prefix, mlp) in [("scorer", &mut self.scorer), ("classifier", &mut self.classifier)] {
            out.push(TensorMut {
                name: format!("{prefix}.hidden_weight"),
                data: mlp.hidden_weight.as_mut_slice(),
            });
            out.push(TensorMut {
                name: format!("{prefix}.hidden_bias"),
                data: &mut mlp.hidden_bias,
            });
            out.push(TensorMut {
                name: format!("{prefix}.out_weight"),
                data: mlp.out_weight.as_mut_slice(),
            });
            out.push(TensorMut {
                name: format!("{prefix}.out_bias"),
                data: &mut mlp.out_bias,
            });
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Checks that all shapes chain together.
    pub fn check_shapes(&self) -> Result<()> {
        let err = |m: String| Err(Error::DimensionMismatch(m));
        if self.layers.is_empty() {
            return err("model has no layers".into());
        }
        let mut d_in = self.input_dim();
        for (l, layer) in self.layers.iter().enumerate() {
            let shape = layer.self_weight.shape();
            if shape.1 != d_in {
                return err(format!("layer {l} expects input {d_in}, has {}", shape.1));
            }
            if layer.relation_weights.iter().any(|w| w.shape() != shape) {
                return err(format!("layer {l} relation weights disagree with self weight"));
            }
            d_in = shape.0;
        }
        let d_l = d_in;
        let mlp_ok = |m: &Mlp, input: usize, output: usize| {
            m.hidden_weight.cols() == input
                && m.hidden_bias.len() == m.hidden_weight.rows()
                && m.out_weight.cols() == m.hidden_weight.rows()
                && m.out_weight.rows() == output
                && m.out_bias.len() == output
        };
        if !mlp_ok(&self.scorer, 3 * d_l + self.aspect_dim(), 1) {
            return err("scorer shapes are inconsistent".into());
        }
        if !mlp_ok(&self.classifier, 3 * d_l, self.num_aspects()) {
            return err("classifier shapes are inconsistent".into());
        }
        Ok(())
    }
}

/// Gradients share the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub ModelParams);

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self(params.zeros_like())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.0.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        let theirs = other.0.tensors();
        for (mine, theirs) in self.0.tensors_mut().into_iter().zip(theirs) {
            for (a, b) in mine.data.iter_mut().zip(theirs.data) {
                *a += b;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}
