//! Mode search over autoregressive sequence distributions.
//!
//! The crate bundles:
//!
//! - a small autoregressive model contract ([`AutoregressiveModel`]) with
//!   chain-rule scoring and ancestral sampling,
//! - analytic distributions (distractor mixtures, typo channels, length
//!   families) compiled into exact trie-backed models,
//! - an add-α n-gram language model,
//! - exact mode search (unconditional and length-conditional) by depth-first
//!   branch-and-bound with a memory-light state cache,
//! - standard, length-constrained and attribute-conditional beam search,
//! - prefix attribute predictors (exact, Monte Carlo, first-token).
//!
//! Data-parallel sweeps (reports, harnesses, Monte Carlo rollouts) run on
//! rayon when the `parallel` feature is enabled and sequentially otherwise;
//! see [`exec`].

pub mod beam;
pub mod error;
pub mod exec;
pub mod io;
pub mod model;
pub mod ngram;
pub mod predictor;
pub mod prob;
pub mod search;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};
pub use model::{sample, sequence_log_prob, AutoregressiveModel, Hypothesis};
pub use vocab::{TokenId, Vocab, EOS, EOS_TOKEN};
