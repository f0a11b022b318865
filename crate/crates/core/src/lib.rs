//! Inference for the Poisson gamma belief network, a deep generative model
//! of term-frequency count matrices. Documents are explained by a stack of
//! gamma-distributed factor activations: the first layer factorizes observed
//! counts under a Poisson likelihood, and each deeper layer explains the
//! factor usage of the layer below through another nonnegative factorization.
//! Latent counts are propagated upward with Chinese restaurant table draws
//! and gamma activations downward, which yields closed-form Gibbs updates at
//! every layer.
//!
//! The crate is organized around that sampler:
//!
//! - [`count_dist`]: samplers and exact mass functions for the count
//!   distributions the augmentation scheme is built from.
//! - [`corpus`]: sparse bag-of-words corpora, vocabulary filtering, and
//!   per-document token holdout.
//! - [`model`]: network parameters, latent state, hyperparameters, and
//!   forward simulation.
//! - [`gibbs`]: the blocked upward-downward Gibbs sweep.
//! - [`structure`]: greedy layer-wise training that infers the width of each
//!   layer by pruning unused factors.
//! - [`eval`]: feature extraction, held-out perplexity, topic projection,
//!   document generation from a trained network, and dispersion
//!   diagnostics.
//! - [`serialize`]: versioned plain-text persistence for networks.
//!
//! Everything is deterministic given a [`rng::StreamRng`] seed: parallel
//! sections draw from per-document substreams, so results are identical for
//! any worker count. The crate is `no_std` compatible (with `alloc`); file
//! formats and the command-line front end live in the companion `pgbn-cli`
//! crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod count_dist;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gibbs;
mod mat;
mod math;
pub mod model;
pub mod rng;
pub mod serialize;
pub mod structure;

pub use error::{Error, Result};
pub use mat::Mat;
pub use rng::StreamRng;
