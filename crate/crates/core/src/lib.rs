//! Stylometric authorship attribution for Bengali: corpus handling, text
//! cleaning, TF-IDF features, a linear SVM, metrics, and frozen-model
//! stop-word ablation.

pub mod ablation;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod sparse;
pub mod svm;
pub mod synthetic;
pub mod textprep;
pub mod tfidf;

pub use error::{Error, ErrorKind, Result};
