//! Metrics and hyperparameter search.

mod metrics;
pub mod search;

pub use metrics::{accuracy, au_roc, ScoredLabel};
pub use search::{random_search, HyperParams, SearchOutcome, SearchSpace, Trial, TrialStatus};
