//! Big-5 personality prediction from tweets.
//!
//! The pipeline cleans each user's tweets, turns them into one fixed-length
//! vector (averaged word embeddings, lexicon category rates or n-gram
//! frequencies), and fits one regressor per trait: exact Gaussian-process
//! regression with an RBF kernel or ridge regression. [`eval`] runs the
//! cross-validated, tweet-sampling and real-life comparisons.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod models;
pub mod preprocess;
pub mod stats;

pub use corpus::{Big5, Trait, TraitScores, UserRecord};
pub use error::{Error, Result};
pub use features::{EmbeddingTable, FeatureConfig, FeatureKind, FeatureVector, Featurizer, Lexicon, OovPolicy};
pub use models::{ModelKind, TraitModelBundle};
pub use preprocess::TokenStream;
