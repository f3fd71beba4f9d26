use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{DEFAULT_EMBED_DIM, DEFAULT_VOCAB_SIZE};

/// Which psychological features are fed to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub concept: bool,
    pub agency: bool,
    pub sociality: bool,
}

impl FeatureFlags {
    pub const NONE: FeatureFlags = FeatureFlags {
        concept: false,
        agency: false,
        sociality: false,
    };

    pub const ALL: FeatureFlags = FeatureFlags {
        concept: true,
        agency: true,
        sociality: true,
    };

    pub fn count(&self) -> usize {
        [self.concept, self.agency, self.sociality].iter().filter(|&&f| f).count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }
}

/// Hyperparameters of the dual-encoder model. Defaults are the tuned
/// values for the full-size model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HerConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub features: FeatureFlags,
    /// Output width of each feature encoder.
    pub feature_encoder_dim: usize,
    /// Width of the fully-connected layer after the merge.
    pub merge_hidden_dim: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for HerConfig {
    fn default() -> Self {
        HerConfig {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: 500,
            num_layers: 3,
            learning_rate: 8.28643e-4,
            dropout: 0.587755,
            batch_size: 32,
            epochs: 30,
            features: FeatureFlags::NONE,
            feature_encoder_dim: 16,
            merge_hidden_dim: 512,
            vocab_size: DEFAULT_VOCAB_SIZE,
            seed: 0,
        }
    }
}

impl HerConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("batch_size", self.batch_size),
            ("feature_encoder_dim", self.feature_encoder_dim),
            ("merge_hidden_dim", self.merge_hidden_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidRate(self.dropout));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    /// Length of one encoded side: the bi-LSTM output plus one encoder
    /// block per enabled feature.
    pub fn encoded_dim(&self) -> usize {
        2 * self.hidden_dim + self.features.count() * self.feature_encoder_dim
    }
}
