use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{EncoderInput, HerModel};
use crate::datasets::HerExample;
use crate::error::{Error, Result};
use crate::eval::{au_roc, ScoredLabel};
use crate::features::Side;
use crate::nn::{AdamState, HasParameters, Mode};

/// Random-access view of a set of examples.
pub trait ExampleSource {
    fn len(&self) -> usize;
    fn example(&self, index: usize) -> &HerExample;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ExampleSource for [HerExample] {
    fn len(&self) -> usize {
        <[HerExample]>::len(self)
    }

    fn example(&self, index: usize) -> &HerExample {
        &self[index]
    }
}

impl ExampleSource for Vec<HerExample> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn example(&self, index: usize) -> &HerExample {
        &self[index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auroc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when validation picked one.
    pub best_epoch: Option<usize>,
}

struct Prepared {
    moment: EncoderInput,
    suggestion: EncoderInput,
    label: usize,
}

fn prepare_all<S: ExampleSource + ?Sized>(model: &HerModel, data: &S) -> Vec<Prepared> {
    (0..data.len())
        .map(|i| {
            let ex = data.example(i);
            Prepared {
                moment: model.prepare(&ex.moment, Side::Moment),
                suggestion: model.prepare(&ex.suggestion, Side::Suggestion),
                label: ex.label.as_index(),
            }
        })
        .collect()
}

fn score_prepared(model: &HerModel, data: &[Prepared]) -> Result<Vec<ScoredLabel>> {
    data.iter()
        .map(|p| {
            Ok(ScoredLabel::new(
                model.predict_prepared(&p.moment, &p.suggestion)?,
                p.label == 1,
            ))
        })
        .collect()
}

/// Mini-batch Adam over shuffled epochs. When `val` has both classes the
/// parameters from the epoch with the best validation AU-ROC are returned;
/// otherwise the final parameters are. Deterministic in `config.seed`.
pub fn train_her<T, V>(mut model: HerModel, train: &T, val: &V) -> Result<(HerModel, TrainingHistory)>
where
    T: ExampleSource + ?Sized,
    V: ExampleSource + ?Sized,
{
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let config = model.config.clone();
    config.validate()?;
    let train_data = prepare_all(&model, train);
    let val_data = prepare_all(&model, val);
    let val_usable = {
        let pos = val_data.iter().filter(|p| p.label == 1).count();
        pos > 0 && pos < val_data.len()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(config.learning_rate);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, HerModel)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            model.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let p = &train_data[i];
                let trace = model.forward_prepared(&p.moment, &p.suggestion, Mode::Train, &mut rng)?;
                total_loss += model.backward(&trace, p.label, scale);
            }
            let mut params = model.parameters_mut();
            adam.update(&mut params)?;
        }
        let train_loss = total_loss / train_data.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss at epoch {epoch}")));
        }
        let val_auroc = if val_usable {
            Some(au_roc(&score_prepared(&model, &val_data)?)?)
        } else {
            None
        };
        if let Some(score) = val_auroc {
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, model.clone()));
                history.best_epoch = Some(epoch);
            }
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_auroc,
        });
    }
    let mut model = match best {
        Some((_, m)) => m,
        None => model,
    };
    model.zero_grad();
    Ok((model, history))
}

/// Scores every example with the eval-mode model.
pub fn score_examples<S: ExampleSource + ?Sized>(model: &HerModel, data: &S) -> Result<Vec<ScoredLabel>> {
    score_prepared(model, &prepare_all(model, data))
}

/// Vocabulary over the moments and suggestions of `examples`.
pub fn build_her_vocab<S: ExampleSource + ?Sized>(examples: &S, max_size: usize) -> Result<crate::text::Vocab> {
    let docs = (0..examples.len()).flat_map(|i| {
        let ex = examples.example(i);
        [crate::text::tokenize(&ex.moment), crate::text::tokenize(&ex.suggestion)]
    });
    crate::text::Vocab::build(docs, max_size)
}
