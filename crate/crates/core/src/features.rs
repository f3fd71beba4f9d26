//! Psychological feature layer: bag-of-words logistic regression for the
//! fifteen happy-moment concepts, agency and sociality, plus the
//! concept-overlap baseline classifier.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::read_jsonl;
use crate::text::{tokenize, Vocab, PAD_INDEX, UNK_INDEX};

/// Default cap for the bag-of-words feature vocabulary.
pub const FEATURE_VOCAB_SIZE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    Family,
    Food,
    Entertainment,
    Career,
    Shopping,
    Romance,
    Conversation,
    Exercise,
    Education,
    Animals,
    Technology,
    Weather,
    Party,
    Vacation,
    Religion,
}

impl Concept {
    pub const COUNT: usize = 15;

    /// Fixed concept-vector order.
    pub const ALL: [Concept; Concept::COUNT] = [
        Concept::Family,
        Concept::Food,
        Concept::Entertainment,
        Concept::Career,
        Concept::Shopping,
        Concept::Romance,
        Concept::Conversation,
        Concept::Exercise,
        Concept::Education,
        Concept::Animals,
        Concept::Technology,
        Concept::Weather,
        Concept::Party,
        Concept::Vacation,
        Concept::Religion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Concept::Family => "Family",
            Concept::Food => "Food",
            Concept::Entertainment => "Entertainment",
            Concept::Career => "Career",
            Concept::Shopping => "Shopping",
            Concept::Romance => "Romance",
            Concept::Conversation => "Conversation",
            Concept::Exercise => "Exercise",
            Concept::Education => "Education",
            Concept::Animals => "Animals",
            Concept::Technology => "Technology",
            Concept::Weather => "Weather",
            Concept::Party => "Party",
            Concept::Vacation => "Vacation",
            Concept::Religion => "Religion",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Concept::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown concept {s:?}")))
    }
}

/// Presence flags for the fifteen concepts, in [`Concept::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ConceptVector(pub [bool; Concept::COUNT]);

impl ConceptVector {
    pub fn from_concepts<I: IntoIterator<Item = Concept>>(concepts: I) -> Self {
        let mut v = ConceptVector::default();
        for c in concepts {
            v.0[c.index()] = true;
        }
        v
    }

    pub fn has(&self, c: Concept) -> bool {
        self.0[c.index()]
    }

    pub fn concepts(&self) -> Vec<Concept> {
        Concept::ALL.into_iter().filter(|c| self.has(*c)).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Sparse token counts over a feature vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BowVector {
    counts: BTreeMap<usize, u32>,
}

impl BowVector {
    pub fn get(&self, index: usize) -> u32 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped.
pub fn featurize_bow<S: AsRef<str>>(tokens: &[S], feature_vocab: &Vocab) -> BowVector {
    let mut counts = BTreeMap::new();
    for t in tokens {
        if let Some(i) = feature_vocab.get(t.as_ref()) {
            if i != PAD_INDEX && i != UNK_INDEX {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
    }
    BowVector { counts }
}

pub fn build_feature_vocab<S: AsRef<str>>(texts: &[S], max_size: usize) -> Result<Vocab> {
    Vocab::build(texts.iter().map(|t| tokenize(t.as_ref())), max_size)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic regression over bag-of-words counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub label: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl LogRegModel {
    pub fn zeros(label: impl Into<String>, vocab_size: usize) -> Self {
        LogRegModel {
            label: label.into(),
            weights: vec![0.0; vocab_size],
            bias: 0.0,
            threshold: 0.5,
        }
    }

    pub fn logit(&self, x: &BowVector) -> f64 {
        self.bias
            + x.iter()
                .map(|(i, c)| self.weights.get(i).copied().unwrap_or(0.0) * f64::from(c))
                .sum::<f64>()
    }

    pub fn probability(&self, x: &BowVector) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Positive only when the probability strictly exceeds the threshold.
    pub fn predict(&self, x: &BowVector) -> (bool, f64) {
        let p = self.probability(x);
        (p > self.threshold, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            epochs: 300,
            learning_rate: 1.0,
        }
    }
}

/// Full-batch gradient descent on the mean logistic loss plus
/// `l2 / 2 · ‖w‖²`, starting from zero weights.
pub fn train_logreg(
    label: &str,
    examples: &[(BowVector, bool)],
    vocab_size: usize,
    params: &LogRegParams,
) -> Result<LogRegModel> {
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::DegenerateData(format!(
            "{label}: need both classes, got {positives} positive of {}",
            examples.len()
        )));
    }
    let mut model = LogRegModel::zeros(label, vocab_size);
    let n = examples.len() as f64;
    let mut grad_w = vec![0.0; vocab_size];
    for _ in 0..params.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in examples {
            let err = model.probability(x) - if *y { 1.0 } else { 0.0 };
            for (i, c) in x.iter() {
                if i < vocab_size {
                    grad_w[i] += err * f64::from(c);
                }
            }
            grad_b += err;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * (g / n + params.l2 * *w);
        }
        model.bias -= params.learning_rate * grad_b / n;
    }
    Ok(model)
}

/// Fifteen per-concept classifiers sharing one feature vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptClassifier {
    pub models: Vec<LogRegModel>,
}

impl ConceptClassifier {
    pub fn train(
        vocab: &Vocab,
        corpus: &[(String, Vec<Concept>)],
        params: &LogRegParams,
    ) -> Result<Self> {
        let bows: Vec<BowVector> = corpus
            .iter()
            .map(|(t, _)| featurize_bow(&tokenize(t), vocab))
            .collect();
        let models = Concept::ALL
            .iter()
            .map(|&concept| {
                let examples: Vec<(BowVector, bool)> = bows
                    .iter()
                    .zip(corpus)
                    .map(|(b, (_, cs))| (b.clone(), cs.contains(&concept)))
                    .collect();
                train_logreg(concept.name(), &examples, vocab.len(), params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConceptClassifier { models })
    }
}

pub fn predict_concept_vector(text: &str, feature_vocab: &Vocab, models: &ConceptClassifier) -> ConceptVector {
    let bow = featurize_bow(&tokenize(text), feature_vocab);
    let mut v = ConceptVector::default();
    for (flag, m) in v.0.iter_mut().zip(&models.models) {
        *flag = m.predict(&bow).0;
    }
    v
}

pub fn predict_binary_feature(text: &str, feature_vocab: &Vocab, model: &LogRegModel) -> (bool, f64) {
    model.predict(&featurize_bow(&tokenize(text), feature_vocab))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapDecision {
    pub entailment: bool,
    /// Shared concepts divided by fifteen.
    pub score: f64,
}

/// Baseline: entailment iff the two texts share any concept.
pub fn concept_overlap_classify(moment: &ConceptVector, suggestion: &ConceptVector) -> OverlapDecision {
    let shared = moment.0.iter().zip(&suggestion.0).filter(|(a, b)| **a && **b).count();
    OverlapDecision {
        entailment: shared > 0,
        score: shared as f64 / Concept::COUNT as f64,
    }
}

/// Which side of a (moment, suggestion) pair a text sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Moment,
    Suggestion,
}

/// Everything needed to annotate a text with psychological features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSuite {
    pub vocab: Vocab,
    pub concepts: Option<ConceptClassifier>,
    pub agency: Option<LogRegModel>,
    pub sociality: Option<LogRegModel>,
}

/// Feature annotations for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TextFeatures {
    pub concepts: Option<ConceptVector>,
    pub agency: Option<bool>,
    pub sociality: Option<bool>,
}

impl FeatureSuite {
    /// Runs every available classifier. Suggestions are always agentic.
    pub fn annotate(&self, text: &str, side: Side) -> TextFeatures {
        let bow = featurize_bow(&tokenize(text), &self.vocab);
        let concepts = self.concepts.as_ref().map(|c| {
            let mut v = ConceptVector::default();
            for (flag, m) in v.0.iter_mut().zip(&c.models) {
                *flag = m.predict(&bow).0;
            }
            v
        });
        let agency = match side {
            Side::Suggestion => Some(true),
            Side::Moment => self.agency.as_ref().map(|m| m.predict(&bow).0),
        };
        TextFeatures {
            concepts,
            agency,
            sociality: self.sociality.as_ref().map(|m| m.predict(&bow).0),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// One line of a labeled feature corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabeledText {
    Binary { text: String, label: u8 },
    Concepts { text: String, concepts: Vec<String> },
}

impl LabeledText {
    pub fn text(&self) -> &str {
        match self {
            LabeledText::Binary { text, .. } | LabeledText::Concepts { text, .. } => text,
        }
    }
}

pub fn load_labeled_corpus(path: &Path) -> Result<Vec<LabeledText>> {
    read_jsonl(path)
}

pub fn binary_examples(corpus: &[LabeledText]) -> Result<Vec<(String, bool)>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, item)| match item {
            LabeledText::Binary { text, label } if *label <= 1 => Ok((text.clone(), *label == 1)),
            LabeledText::Binary { label, .. } => {
                Err(Error::Config(format!("record {}: label {label} is not 0 or 1", i + 1)))
            }
            LabeledText::Concepts { .. } => {
                Err(Error::Config(format!("record {}: expected a 0/1 label", i + 1)))
            }
        })
        .collect()
}

pub fn concept_examples(corpus: &[LabeledText]) -> Result<Vec<(String, Vec<Concept>)>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, item)| match item {
            LabeledText::Concepts { text, concepts } => Ok((
                text.clone(),
                concepts.iter().map(|c| c.parse()).collect::<Result<Vec<Concept>>>()?,
            )),
            LabeledText::Binary { .. } => {
                Err(Error::Config(format!("record {}: expected a concepts list", i + 1)))
            }
        })
        .collect()
}

/// Trains a binary feature classifier from raw texts.
pub fn train_binary_feature(
    label: &str,
    vocab: &Vocab,
    examples: &[(String, bool)],
    params: &LogRegParams,
) -> Result<LogRegModel> {
    let data: Vec<(BowVector, bool)> = examples
        .iter()
        .map(|(t, y)| (featurize_bow(&tokenize(t), vocab), *y))
        .collect();
    train_logreg(label, &data, vocab.len(), params)
}
