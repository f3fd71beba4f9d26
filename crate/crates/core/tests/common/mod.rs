//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

pub mod experiments;
pub mod grad_cases;

use happiness_core::eval::ScoredLabel;
use happiness_core::features::{Concept, ConceptClassifier, FeatureSuite, LogRegModel};
use happiness_core::her::{FeatureFlags, HerConfig};
use happiness_core::nn::{Matrix, Parameter};
use happiness_core::text::Vocab;
use rand::Rng;

/// AU-ROC straight from the pairwise definition.
pub fn brute_force_au_roc(items: &[ScoredLabel]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for p in items.iter().filter(|i| i.positive) {
        for n in items.iter().filter(|i| !i.positive) {
            pairs += 1;
            if p.score > n.score {
                wins += 1.0;
            } else if p.score == n.score {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}

/// One column parameter per sequence position.
pub fn sequence_params<R: Rng>(len: usize, dim: usize, rng: &mut R) -> Vec<Parameter> {
    (0..len)
        .map(|t| Parameter::new(format!("x{t}"), Matrix::uniform(dim, 1, 1.0, rng)))
        .collect()
}

pub fn values(seq: &[Parameter]) -> Vec<Vec<f64>> {
    seq.iter().map(|p| p.value.as_slice().to_vec()).collect()
}

pub fn add_grads(seq: &mut [Parameter], grads: &[Vec<f64>]) {
    for (p, g) in seq.iter_mut().zip(grads) {
        for (a, b) in p.grad.as_mut_slice().iter_mut().zip(g) {
            *a += b;
        }
    }
}

pub fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub const WORDS: &[&str] = &["walk", "dog", "pizza", "mom", "movie", "gym", "rain", "party", "friend", "bath"];

pub fn word_vocab() -> Vocab {
    Vocab::build(vec![WORDS.to_vec()], 100).unwrap()
}

fn random_logreg<R: Rng>(label: &str, n: usize, rng: &mut R) -> LogRegModel {
    let mut m = LogRegModel::zeros(label, n);
    for w in m.weights.iter_mut() {
        *w = rng.gen_range(-3.0..3.0);
    }
    m.bias = rng.gen_range(-1.0..1.0);
    m
}

/// Feature classifiers with random weights so every flag varies with the text.
pub fn random_feature_suite<R: Rng>(rng: &mut R) -> FeatureSuite {
    let vocab = word_vocab();
    let n = vocab.len();
    FeatureSuite {
        concepts: Some(ConceptClassifier {
            models: Concept::ALL.iter().map(|c| random_logreg(c.name(), n, rng)).collect(),
        }),
        agency: Some(random_logreg("agency", n, rng)),
        sociality: Some(random_logreg("sociality", n, rng)),
        vocab,
    }
}

pub fn tiny_her_config(seed: u64, features: FeatureFlags) -> HerConfig {
    HerConfig {
        embed_dim: 4,
        hidden_dim: 4,
        num_layers: 2,
        merge_hidden_dim: 6,
        feature_encoder_dim: 3,
        dropout: 0.3,
        features,
        seed,
        ..HerConfig::default()
    }
}

pub fn random_phrase<R: Rng>(len: usize, rng: &mut R) -> String {
    (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}
