//! Aspect-conditioned heterogeneous graph neural network for research-paper
//! recommendation.
//!
//! Node features are precomputed embeddings loaded from files. The crate
//! builds the paper/author graph, samples neighbourhoods, runs relation-typed
//! message passing, scores candidates per aspect, trains with a BPR ranking
//! loss plus an auxiliary aspect classifier, and evaluates retrieval with
//! P@k, R@k and MRR.

pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
