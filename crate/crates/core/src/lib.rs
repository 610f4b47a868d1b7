//! Taxonomy-guided topic mining on the unit sphere: joint text and category
//! tree embeddings trained with Riemannian SGD inside an EM loop, plus a
//! von Mises-Fisher document classifier.

// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod miner;
pub mod model;
pub mod synth;
pub mod taxonomy;
pub mod trainer;

pub use error::{Error, Result};
