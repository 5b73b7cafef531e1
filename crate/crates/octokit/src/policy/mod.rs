//! Tiny differentiable autoregressive policy.
//!
//! The policy mixes an instruction encoding (bag-of-word-bucket
//! embeddings, grounded numeric features, pooled goal signatures), a
//! pooled observation-history window and the current observation into a
//! hidden state, then decodes answer tokens autoregressively with exact
//! log-softmax likelihoods. A tape-based reverse-mode engine
//! ([`autodiff`]) supplies gradients that are audited against finite
//! differences in the test suite.

pub mod autodiff;
mod checkpoint;
mod model;
pub mod vocab;

pub use autodiff::{grad, GradStore, Graph, NodeId, ParamStore, SgdMomentum, Tensor};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{
    log_prob, log_prob_nodes, masked_step_distribution, sample_answer, Context, PolicyConfig,
    PolicyParams, PromptMode, SampleTrace,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("token {0} is outside the vocabulary")]
    OutOfVocab(usize),
    #[error("checkpoint error: {0}")]
    BadCheckpoint(String),
    #[error("checkpoint version {found} does not match expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint vocabulary size {found} does not match build ({expected})")]
    VocabMismatch { found: u32, expected: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
