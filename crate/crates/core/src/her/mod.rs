//! The entailment model: shared bi-LSTM encoder, optional feature encoders,
//! merge head, training, ranking and checkpoints.

mod checkpoint;
mod config;
mod model;
mod rank;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint};
pub use config::{FeatureFlags, HerConfig};
pub use model::{merge, EncodedPair, EncoderInput, HerModel};
pub use rank::{rank_suggestions, Ranked};
pub use train::{build_her_vocab, score_examples, train_her, EpochRecord, ExampleSource, TrainingHistory};
