//! Latent Dirichlet Allocation toolkit.
//!
//! Two trainers share one corpus representation:
//!
//! * [`gibbs`]: collapsed Gibbs sampling over topic assignments, with
//!   parameter estimation, held-out perplexity and new-document inference.
//! * [`vem`]: variational EM with per-document coordinate ascent and a
//!   Newton update for a symmetric Dirichlet prior.
//!
//! [`parallel`] runs the Gibbs sweep on several workers (copy/merge and
//! block-diagonal schemes), [`analytics`] ranks documents, topics and words
//! from a trained model, and [`model_io`] reads and writes the model files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod corpus;
pub mod error;
pub mod gibbs;
pub mod matrix;
pub mod model_io;
pub mod parallel;
pub mod rng;
pub mod vem;

pub use corpus::{Corpus, Document, Vocabulary};
pub use error::{LdaError, Result};
pub use gibbs::{GibbsHyper, GibbsState, TopicModel};
pub use matrix::Matrix;
pub use vem::{VemModel, VemSettings};
