//! Clustering-based random undersampling for imbalanced binary classification.
//!
//! The crate covers the whole pipeline: schema-typed datasets, mixed-attribute
//! k-means, resamplers (RUS, SMOTE and clustering-RUS), gain-ratio trees and
//! tree ensembles, imbalance-aware metrics, a leakage-safe cross-validation
//! harness with cluster-routed models, rank-based classifier comparison and
//! feature selection.
//!
//! Data-parallel loops (folds, ensemble members, k-means assignment, subset
//! evaluation) run on rayon when the `parallel` feature is enabled. Results are
//! identical in both modes; see [`par`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod distance_clustering;
pub mod ensembles;
pub mod error;
pub mod evaluation;
pub mod feature_select;
pub mod info;
pub mod metrics;
pub mod par;
pub mod resampling;
pub mod seeding;
pub mod stats_compare;
pub mod trees;

pub use dataset::{AttributeKind, AttributeSpec, ClassLabel, Dataset, FoldSplit, Instance, Schema};
pub use error::{Error, Result};
