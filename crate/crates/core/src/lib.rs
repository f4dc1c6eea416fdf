//! Multi-dimensional ideological polarization inference for tweet corpora.
//!
//! Users are placed along three axes (science, political, moderacy) from
//! the curated news domains they share, and those labels are extended to
//! the rest of the corpus by label propagation on the retweet graph or by
//! logistic regression over hashtag TF-IDF, hashtag topic affinities or
//! averaged word embeddings.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the pipeline's default precision.

pub mod analysis;
pub mod bow;
pub mod catalog;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod graph;
pub mod lda;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use catalog::{Bin, Dimension, DomainCatalog, Pole, PoleLabel};
pub use corpus::{TweetRecord, UserAggregate};
pub use error::{Error, Result};
pub use graph::{RetweetGraph, SeedSet};
pub use scalar::Real;

/// Default working precision.
pub type Scalar = f64;

pub type DimScore = catalog::DimScore<f64>;
pub type DimScore32 = catalog::DimScore<f32>;
pub type Cutoffs = catalog::Cutoffs<f64>;
pub type CrossScore = catalog::CrossScore<f64>;
pub type SparseFeatures = bow::SparseFeatures<f64>;
pub type SparseFeatures32 = bow::SparseFeatures<f32>;
pub type IdfTable = bow::IdfTable<f64>;
pub type EmbeddingTable = embed::EmbeddingTable<f64>;
pub type EmbeddingTable32 = embed::EmbeddingTable<f32>;
pub type DocEmbedding = embed::DocEmbedding<f64>;
pub type LogRegModel = model::LogRegModel<f64>;
pub type LogRegModel32 = model::LogRegModel<f32>;
pub type EvalReport = model::EvalReport<f64>;
pub type Metrics = model::Metrics<f64>;
pub type ScorePaths = analysis::ScorePaths<f64>;
