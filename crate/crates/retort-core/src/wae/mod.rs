//! The reactant-bag autoencoder.
//!
//! Encoder: molecule embeddings are summed over the multiset (multiplicity
//! counted), then a feed-forward net parameterizes a diagonal Gaussian over
//! the 25-dimensional latent. Decoder: a 2-layer GRU picks one vocabulary
//! reactant (or the halt embedding) per step, up to `t_max`, each pick's
//! embedding feeding the next step. The training objective is teacher-forced
//! reconstruction plus `lambda` times the MMD between the batch posterior
//! sample and the standard-normal prior; a small property head on the latent
//! is trained jointly against product scores.

mod frozen;
mod loss;
mod model;
mod train;
mod vocab;

pub use frozen::FrozenWae;
pub use loss::{batch_loss, reconstruction_loss, wae_loss, LossParts};
pub use model::{
    decode_greedy, decode_sample, encode, property_grad, property_head_var, property_score,
    register_model, DecodeResult, DecodeStep, GaussianPosterior, ModelDims, VocabEmbeddings,
};
pub use train::{
    property_targets, train, train_with_targets, EpochLog, TrainedWae, WaeTrainConfig,
};
pub use vocab::{ReactantBag, ReactantVocabulary, VocabEntry, VocabError};

use crate::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaeError {
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("reactant bag must not be empty")]
    EmptyBag,
    #[error("bag index {index} outside vocabulary of {len}")]
    BagIndexOutOfRange { index: usize, len: usize },
    #[error("batch of {0} is too small for the MMD term (need >= 2)")]
    BatchTooSmall(usize),
    #[error("ordering is not a permutation of the bag")]
    BadOrdering,
    #[error("bag of {len} exceeds the decoder horizon t_max = {t_max}")]
    BagTooLarge { len: usize, t_max: usize },
    #[error("feature error: {0}")]
    Feature(#[from] crate::chem::FeatureError),
}
