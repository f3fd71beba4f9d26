//! Small end-to-end runs with known answers, shared by the integration
//! tests and the acceptance report.

use std::time::{Duration, Instant};

use happiness_core::datasets::HerExample;
use happiness_core::eval::{au_roc, ScoredLabel};
use happiness_core::features::{concept_overlap_classify, Concept, FeatureSuite, Side};
use happiness_core::her::{build_her_vocab, score_examples, train_her, FeatureFlags, HerConfig, HerModel};
use happiness_core::suggestibility::{train_suggestibility, ClassifierKind, SuggestibilityConfig};
use happiness_core::synthetic::{
    concept_feature_suite, concept_overlap_task, lexical_cue_task, marker_task, suggestibility_task,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn desk_config(epochs: usize, seed: u64) -> HerConfig {
    HerConfig {
        embed_dim: 16,
        hidden_dim: 16,
        num_layers: 1,
        merge_hidden_dim: 32,
        learning_rate: 5e-3,
        dropout: 0.1,
        batch_size: 8,
        epochs,
        seed,
        ..HerConfig::default()
    }
}

fn fit(train: &[HerExample], config: HerConfig, features: Option<FeatureSuite>) -> HerModel {
    let vocab = build_her_vocab(train, config.vocab_size).unwrap();
    let model = HerModel::new(config, vocab, None, features).unwrap();
    train_her(model, train, &Vec::new()).unwrap().0
}

fn model_au_roc(model: &HerModel, data: &[HerExample]) -> f64 {
    au_roc(&score_examples(model, data).unwrap()).unwrap()
}

/// Concept-overlap baseline score of every pair, through the classifiers.
fn baseline_au_roc(suite: &FeatureSuite, data: &[HerExample]) -> f64 {
    let scored: Vec<ScoredLabel> = data
        .iter()
        .map(|e| {
            let m = suite.annotate(&e.moment, Side::Moment).concepts.unwrap();
            let s = suite.annotate(&e.suggestion, Side::Suggestion).concepts.unwrap();
            ScoredLabel::new(concept_overlap_classify(&m, &s).score, e.label.is_positive())
        })
        .collect();
    au_roc(&scored).unwrap()
}

pub struct Overfit {
    pub train_au_roc: f64,
    /// First epoch (1-based) whose end-of-epoch train AU-ROC reached 0.99.
    pub first_epoch_at_target: Option<usize>,
    pub epochs: usize,
    pub elapsed: Duration,
}

/// 40 marker-task pairs, hidden width 16, one layer, 200 epochs; the
/// training pairs double as the monitoring set.
pub fn overfit_marker_task() -> Overfit {
    let train = marker_task(40, &mut ChaCha8Rng::seed_from_u64(1));
    let config = HerConfig {
        learning_rate: 1e-2,
        dropout: 0.0,
        ..desk_config(200, 0)
    };
    let start = Instant::now();
    let vocab = build_her_vocab(&train, config.vocab_size).unwrap();
    let model = HerModel::new(config, vocab, None, None).unwrap();
    let (model, history) = train_her(model, &train, &train).unwrap();
    let elapsed = start.elapsed();
    Overfit {
        train_au_roc: model_au_roc(&model, &train),
        first_epoch_at_target: history
            .epochs
            .iter()
            .find(|e| e.val_auroc.is_some_and(|v| v >= 0.99))
            .map(|e| e.epoch + 1),
        epochs: history.epochs.len(),
        elapsed,
    }
}

pub struct Comparison {
    pub baseline: f64,
    pub learned: f64,
}

/// Labels equal concept overlap; the model also reads concept features.
pub fn concept_overlap_comparison() -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let suite = concept_feature_suite(20, &mut rng).unwrap();
    let concepts = &Concept::ALL[..5];
    let train = concept_overlap_task(200, concepts, &mut rng);
    let test = concept_overlap_task(100, concepts, &mut rng);
    let config = HerConfig {
        features: FeatureFlags {
            concept: true,
            ..FeatureFlags::NONE
        },
        ..desk_config(30, 5)
    };
    let model = fit(&train, config, Some(suite.clone()));
    Comparison {
        baseline: baseline_au_roc(&suite, &test),
        learned: model_au_roc(&model, &test),
    }
}

/// Labels hinge on a cue word that belongs to no concept.
pub fn lexical_cue_comparison() -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let suite = concept_feature_suite(20, &mut rng).unwrap();
    let train = lexical_cue_task(150, &mut rng);
    let test = lexical_cue_task(60, &mut rng);
    let model = fit(&train, desk_config(30, 6), None);
    Comparison {
        baseline: baseline_au_roc(&suite, &test),
        learned: model_au_roc(&model, &test),
    }
}

/// Held-out AU-ROC of a suggestibility classifier on the synthetic task.
pub fn suggestibility_held_out(kind: ClassifierKind, config: &SuggestibilityConfig) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = suggestibility_task(200, &mut rng);
    let (train, test) = data.split_at(140);
    let model = train_suggestibility(train, kind, config, &mut rng).unwrap();
    let scored: Vec<_> = test
        .iter()
        .map(|e| ScoredLabel::new(model.score(&e.text).unwrap(), e.label.is_positive()))
        .collect();
    au_roc(&scored).unwrap()
}
