//! Core library for `retort`: a generative pipeline over bags of purchasable
//! reactants.
//!
//! The pieces, bottom up:
//!
//! - [`chem`] — molecular graphs, a SMILES subset parser/writer with its own
//!   canonical form, valence checking, atom featurization, descriptors and a
//!   surrogate drug-likeness score.
//! - [`nn`] — a minimal dense f64 tensor engine with a reverse-mode tape,
//!   GRU cells, Adam, MMD, a finite-difference gradient oracle and a Jacobi
//!   PSD matrix square root.
//! - [`ggnn`] — gated graph neural network producing order-invariant
//!   molecule embeddings.
//! - [`wae`] — the reactant-bag autoencoder: multiset encoder, sequential
//!   decoder over a fixed reactant vocabulary with a learnt halt embedding,
//!   MMD-regularized training objective and a latent property head.
//! - [`reaction`] — a deterministic template engine mapping reactant bags to
//!   product bags, plus the line protocol for plugging in an external
//!   reaction predictor.
//! - [`search`] — gradient ascent and random walks in latent space, and a
//!   product-to-latent regressor for single-step retrosynthesis.
//! - [`metrics`] — validity/uniqueness/novelty over sampled product bags and
//!   a Fréchet distance over the internal molecule embeddings.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all float
//! transcendentals go through `libm` so results are bit-identical across
//! platforms. Everything here is deterministic given the caller's RNG.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub(crate) mod prelude;

pub mod chem;
pub mod fmath;
pub mod ggnn;
pub mod metrics;
pub mod nn;
pub mod reaction;
pub mod rng;
pub mod search;
pub mod wae;
