//! Happiness entailment recognition: a shared-encoder dual-encoder model
//! that decides whether an activity suggestion suits a person's written
//! happy moment, the psychological feature classifiers that augment it, and
//! the tooling around it (dataset construction, suggestion mining,
//! evaluation and hyperparameter search).

pub mod datasets;
pub mod error;
pub mod eval;
pub mod features;
pub mod her;
pub mod jsonl;
pub mod nn;
pub mod suggestibility;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
