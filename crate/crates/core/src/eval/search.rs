//! Randomized hyperparameter search.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::her::HerConfig;
use crate::jsonl::write_jsonl;

/// Default number of trials.
pub const DEFAULT_TRIALS: usize = 9;

/// Sampling distributions per hyperparameter; `None` leaves it fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Log-uniform bounds.
    pub learning_rate: Option<(f64, f64)>,
    /// Uniform bounds.
    pub dropout: Option<(f64, f64)>,
    pub batch_size: Option<Vec<usize>>,
    pub hidden_dim: Option<Vec<usize>>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: Some((1e-5, 1e-2)),
            dropout: Some((0.0, 0.8)),
            batch_size: Some(vec![8, 16, 32, 64]),
            hidden_dim: Some(vec![100, 200, 300, 500]),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let mut sampled = 0;
        if let Some((lo, hi)) = self.learning_rate {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!("learning-rate bounds [{lo}, {hi}] must be positive and ordered")));
            }
            sampled += 1;
        }
        if let Some((lo, hi)) = self.dropout {
            if !(0.0 <= lo && lo <= hi && hi < 1.0) {
                return Err(Error::Config(format!("dropout bounds [{lo}, {hi}] must lie in [0, 1)")));
            }
            sampled += 1;
        }
        for (name, set) in [("batch_size", &self.batch_size), ("hidden_dim", &self.hidden_dim)] {
            if let Some(set) = set {
                if set.is_empty() || set.contains(&0) {
                    return Err(Error::Config(format!("{name} choices must be non-empty and positive")));
                }
                sampled += 1;
            }
        }
        if sampled == 0 {
            return Err(Error::Config("search space samples nothing".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParams {
        HyperParams {
            learning_rate: self
                .learning_rate
                .map(|(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo.ln()..hi.ln()).exp() }),
            dropout: self.dropout.map(|(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..hi) }),
            batch_size: self.batch_size.as_ref().map(|c| c[rng.gen_range(0..c.len())]),
            hidden_dim: self.hidden_dim.as_ref().map(|c| c[rng.gen_range(0..c.len())]),
        }
    }
}

/// One sampled point of a [`SearchSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
}

impl HyperParams {
    /// Overrides the sampled fields of `base`.
    pub fn apply(&self, base: &HerConfig) -> HerConfig {
        let mut c = base.clone();
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.hidden_dim {
            c.hidden_dim = v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialStatus::Ok => f.write_str("ok"),
            TrialStatus::Failed => f.write_str("failed"),
        }
    }
}

/// One line of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub config: HyperParams,
    pub val_auroc: Option<f64>,
    pub status: TrialStatus,
    /// Seed handed to the scoring function.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Generator for trial `index`: stream `index` of the ChaCha generator
/// keyed by `seed`, so trials are independent of evaluation order.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Samples `n_trials` configurations, scores each with `score` and returns
/// the best (earliest on ties). A trial fails when `score` errors or
/// returns a non-finite value; failed trials never win.
pub fn random_search<F, E>(space: &SearchSpace, n_trials: usize, seed: u64, mut score: F) -> Result<SearchOutcome>
where
    F: FnMut(&HyperParams, u64) -> std::result::Result<f64, E>,
    E: fmt::Display,
{
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("random search needs at least one trial".into()));
    }
    let mut trials = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let mut rng = trial_rng(seed, index);
        let config = space.sample(&mut rng);
        let trial_seed = rng.gen::<u64>();
        let (val_auroc, status, error) = match score(&config, trial_seed) {
            Ok(v) if v.is_finite() => (Some(v), TrialStatus::Ok, None),
            Ok(v) => (None, TrialStatus::Failed, Some(format!("non-finite score {v}"))),
            Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
        };
        trials.push(Trial {
            trial: index,
            config,
            val_auroc,
            status,
            seed: trial_seed,
            error,
        });
    }
    let mut best: Option<&Trial> = None;
    for t in &trials {
        if let Some(v) = t.val_auroc {
            if best.and_then(|b| b.val_auroc).is_none_or(|b| v > b) {
                best = Some(t);
            }
        }
    }
    let best = best.cloned().ok_or(Error::AllTrialsFailed(n_trials))?;
    Ok(SearchOutcome { best, trials })
}

pub fn write_trial_log(path: &Path, trials: &[Trial]) -> Result<()> {
    write_jsonl(path, trials)
}
