//! Dataless text classification with a weakly supervised prototype topic
//! model: documents plus a handful of seed words per category are turned
//! into a document-specific Dirichlet prior, and a category/background topic
//! model with a document-graph regularizer is fitted by generalized EM.

// `!(x > 0.0)` style checks are kept so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod pipeline;
pub mod priors;
pub mod synthetic;

pub use error::{Error, Result};
