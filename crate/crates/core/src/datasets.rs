//! HER dataset construction: vote aggregation with asymmetric confidence
//! filtering, class balancing, stratified splitting and JSONL IO.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::{read_jsonl, write_jsonl};

pub const VOTES_PER_TASK: usize = 5;

/// Positive labels need at least this many yes votes.
pub const ENTAILMENT_MIN_VOTES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    NonEntailment,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Entailment
    }

    pub fn as_index(self) -> usize {
        usize::from(self.is_positive())
    }
}

/// Five worker votes on one (moment, suggestion) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub moment: String,
    pub suggestion: String,
    pub votes: [bool; VOTES_PER_TASK],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationales: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HerAggregate {
    Entailment,
    NonEntailment,
    Excluded,
}

impl HerAggregate {
    pub fn label(self) -> Option<Label> {
        match self {
            HerAggregate::Entailment => Some(Label::Entailment),
            HerAggregate::NonEntailment => Some(Label::NonEntailment),
            HerAggregate::Excluded => None,
        }
    }
}

/// Entailment with at least four yes votes, non-entailment only when all
/// five workers said no; anything else is too uncertain to keep.
pub fn aggregate_votes(votes: &[bool; VOTES_PER_TASK]) -> HerAggregate {
    let yes = votes.iter().filter(|&&v| v).count();
    if yes >= ENTAILMENT_MIN_VOTES {
        HerAggregate::Entailment
    } else if yes == 0 {
        HerAggregate::NonEntailment
    } else {
        HerAggregate::Excluded
    }
}

pub fn aggregate_her_annotations(task: &AnnotationTask) -> HerAggregate {
    aggregate_votes(&task.votes)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HerExample {
    pub moment: String,
    pub suggestion: String,
    pub label: Label,
}

/// Aggregated examples plus the tasks that did not reach agreement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregated {
    pub examples: Vec<HerExample>,
    pub excluded: Vec<AnnotationTask>,
}

pub fn aggregate_tasks(tasks: &[AnnotationTask]) -> Aggregated {
    let mut out = Aggregated::default();
    for task in tasks {
        match aggregate_her_annotations(task).label() {
            Some(label) => out.examples.push(HerExample {
                moment: task.moment.clone(),
                suggestion: task.suggestion.clone(),
                label,
            }),
            None => out.excluded.push(task.clone()),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    /// Gives 1068/148/148 on 1,364 balanced examples.
    fn default() -> Self {
        SplitRatios {
            train: 0.783,
            validation: 0.1085,
            test: 0.1085,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// Per-class split sizes for `n` items. Train and validation are
    /// rounded, test takes the remainder.
    fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64 * self.train).round() as usize).min(n);
        let val = ((n as f64 * self.validation).round() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<HerExample>,
    pub validation: Vec<HerExample>,
    pub test: Vec<HerExample>,
    pub seed: u64,
}

/// Downsamples the majority class to the minority count uniformly at
/// random.
pub fn balance(examples: Vec<HerExample>, rng: &mut ChaCha8Rng) -> Result<Vec<HerExample>> {
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| e.label.is_positive());
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateData(format!(
            "balancing needs both classes, got {} positive and {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let n = pos.len().min(neg.len());
    for class in [&mut pos, &mut neg] {
        if class.len() > n {
            class.shuffle(rng);
            class.truncate(n);
        }
    }
    pos.extend(neg);
    Ok(pos)
}

/// Balances the classes, then splits each class by `ratios` and shuffles
/// every split. Deterministic in `seed`.
pub fn balance_and_split(examples: Vec<HerExample>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let balanced = balance(examples, &mut rng)?;
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = balanced.into_iter().partition(|e| e.label.is_positive());
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for class in [&mut pos, &mut neg] {
        class.shuffle(&mut rng);
        let (tr, va, _) = ratios.sizes(class.len());
        let mut rest = std::mem::take(class);
        let test = rest.split_off(tr + va);
        let val = rest.split_off(tr);
        split.train.extend(rest);
        split.validation.extend(val);
        split.test.extend(test);
    }
    split.train.shuffle(&mut rng);
    split.validation.shuffle(&mut rng);
    split.test.shuffle(&mut rng);
    Ok(split)
}

pub fn load_examples(path: &Path) -> Result<Vec<HerExample>> {
    read_jsonl(path)
}

pub fn save_examples(path: &Path, examples: &[HerExample]) -> Result<()> {
    write_jsonl(path, examples)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationTask>> {
    read_jsonl(path)
}

pub fn save_annotations(path: &Path, tasks: &[AnnotationTask]) -> Result<()> {
    write_jsonl(path, tasks)
}
