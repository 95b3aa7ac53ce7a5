//! Metadata-aware extreme multi-label tagging for scientific literature.
//!
//! The pipeline is:
//!
//! 1. [`corpus`] loads papers and a label taxonomy, splits by publication year and
//!    builds a [`FeatureIndex`] over words and metadata (venues, authors, references).
//! 2. [`features`] turns a paper into a sparse tf-idf vector: bag-of-words followed by
//!    bag-of-metadata.
//! 3. [`label_tree`] clusters labels into an ensemble of balanced binary trees.
//! 4. [`classifier`] trains sparse logistic classifiers at every tree node and predicts
//!    with beam search, optionally re-ranking labels whose names occur in the text.
//! 5. [`eval`] and [`analysis`] compute ranking metrics, significance tests and
//!    per-field metadata effect vectors.
//!
//! The numeric core is generic over the scalar type through [`Real`]; the aliases
//! below fix it to `f64`, which is what the command-line tool uses.

pub mod analysis;
pub mod classifier;
mod codec;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
mod fsutil;
pub mod label_tree;
pub mod scalar;

pub use classifier::{Model, NodeClassifier, Prediction, TrainParams};
pub use corpus::{DatasetSplit, FeatureIndex, MetadataKind, Paper, Taxonomy};
pub use error::{Error, Result};
pub use features::{FeatureConfig, SparseVector};
pub use fsutil::write_atomic;
pub use label_tree::{LabelRepresentation, LabelTree, TreeConfig};
pub use scalar::Real;

/// Sparse feature vector in double precision.
pub type SparseVec = SparseVector<f64>;
/// Trained model in double precision.
pub type Model64 = Model<f64>;
/// Trained model in single precision, half the memory of [`Model64`].
pub type Model32 = Model<f32>;
/// Ranked prediction in double precision.
pub type Prediction64 = Prediction<f64>;
/// Per-node classifier in double precision.
pub type NodeClassifier64 = NodeClassifier<f64>;
