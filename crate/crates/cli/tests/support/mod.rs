#![allow(dead_code)]

use std::path::Path;

use happiness_core::datasets::{save_examples, HerExample};
use happiness_core::features::Concept;
use happiness_core::her::{build_her_vocab, train_her, FeatureFlags, HerConfig, HerModel};
use happiness_core::synthetic::{concept_feature_suite, concept_overlap_task, marker_task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HAIRCUT: &str =
    "I was able to find time to go have my hair cut, something I have been putting off all month and it looks great!";

pub fn tiny_config(seed: u64) -> HerConfig {
    HerConfig {
        embed_dim: 8,
        hidden_dim: 8,
        num_layers: 1,
        merge_hidden_dim: 16,
        feature_encoder_dim: 4,
        epochs: 3,
        batch_size: 8,
        dropout: 0.1,
        learning_rate: 1e-2,
        vocab_size: 500,
        seed,
        ..HerConfig::default()
    }
}

pub const TINY_CONFIG_JSON: &str = r#"{"embed_dim": 8, "hidden_dim": 8, "num_layers": 1, "merge_hidden_dim": 16,
"feature_encoder_dim": 4, "epochs": 3, "batch_size": 8, "dropout": 0.1, "learning_rate": 0.01, "vocab_size": 500}"#;

/// Small model trained briefly on the marker task.
pub fn trained_model(seed: u64) -> HerModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = marker_task(40, &mut rng);
    let config = tiny_config(seed);
    let vocab = build_her_vocab(&data, config.vocab_size).unwrap();
    let model = HerModel::new(config, vocab, None, None).unwrap();
    train_her(model, &data, &Vec::<HerExample>::new()).unwrap().0
}

/// Untrained model whose encoder also reads concept features.
pub fn concept_model(seed: u64) -> HerModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let suite = concept_feature_suite(20, &mut rng).unwrap();
    let data = concept_overlap_task(20, &Concept::ALL, &mut rng);
    let config = HerConfig {
        features: FeatureFlags {
            concept: true,
            ..FeatureFlags::NONE
        },
        ..tiny_config(seed)
    };
    let vocab = build_her_vocab(&data, config.vocab_size).unwrap();
    HerModel::new(config, vocab, None, Some(suite)).unwrap()
}

/// Writes a balanced train/validation pair of marker-task files.
pub fn write_marker_data(dir: &Path, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = dir.join("train.jsonl");
    let val = dir.join("val.jsonl");
    save_examples(&train, &marker_task(40, &mut rng)).unwrap();
    save_examples(&val, &marker_task(20, &mut rng)).unwrap();
    (train, val)
}
