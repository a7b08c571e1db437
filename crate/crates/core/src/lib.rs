//! Clause segmentation, Labov clause-type classification and
//! aspect-restricted similarity for spoken personal narratives.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`treebank`] reads bracketed constituency parses and cuts each sentence
//!    into narrative clauses.
//! 2. [`corpus`] holds stories and crowd annotations, derives gold labels by
//!    majority vote and splits the data by story.
//! 3. [`features`] and [`classifier`] turn clauses into word-vector plus
//!    POS one-hot matrices and train a convolutional classifier (and the
//!    POS-only SVM / random-forest baselines).
//! 4. [`matcher`] scores story pairs on a single clause type and summarizes
//!    forced-choice similarity judgments.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod features;
pub mod matcher;
pub mod synthetic;
pub mod treebank;

pub use error::{Error, Result};
