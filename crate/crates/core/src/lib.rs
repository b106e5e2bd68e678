//! Multi-task language modeling for code-switched text.
//!
//! A word-level LSTM language model reads the concatenation of word and
//! bilingual POS-tag embeddings; a second LSTM models the tag sequence and
//! its hidden state is added to the word model's before the tied softmax.
//! Both towers train jointly on a weighted sum of their cross-entropies.

pub mod analysis;
pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod model;
pub mod nn;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
