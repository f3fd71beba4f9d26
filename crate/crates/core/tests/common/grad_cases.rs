//! Scalar test functions around each differentiable component. Each one
//! projects the component output onto fixed random weights so that every
//! output coordinate contributes to the gradient.

use happiness_core::features::FeatureSuite;
use happiness_core::her::{FeatureFlags, HerModel};
use happiness_core::nn::{
    grad_check, BiLstm, Differentiable, HasParameters, Linear, LstmLayerParams, Mode, Parameter,
};
use happiness_core::suggestibility::{AttentionClassifier, SelfAttention, SuggestibilityConfig};
use happiness_core::text::Vocab;
use happiness_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_grads, random_feature_suite, random_phrase, random_vec, sequence_params, tiny_her_config, values, word_vocab};

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const SEEDS: u64 = 20;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct LinearCase {
    layer: Linear,
    x: Parameter,
    c: Vec<f64>,
}

impl LinearCase {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, o) = (rng.gen_range(1..6), rng.gen_range(1..6));
        LinearCase {
            layer: Linear::new("lin", i, o, &mut rng),
            x: sequence_params(1, i, &mut rng).remove(0),
            c: random_vec(o, &mut rng),
        }
    }
}

impl Differentiable for LinearCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.layer.parameters_mut();
        p.push(&mut self.x);
        p
    }

    fn value(&mut self) -> Result<f64> {
        Ok(dot(&self.c, &self.layer.forward(self.x.value.as_slice())?))
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        let v = self.value()?;
        let dx = self.layer.backward(self.x.value.as_slice(), &self.c);
        add_grads(std::slice::from_mut(&mut self.x), &[dx]);
        Ok(v)
    }
}

pub struct LstmCase {
    layer: LstmLayerParams,
    xs: Vec<Parameter>,
    c: Vec<Vec<f64>>,
    reversed: bool,
}

impl LstmCase {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, h, t) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
        LstmCase {
            layer: LstmLayerParams::new("lstm", i, h, &mut rng),
            xs: sequence_params(t, i, &mut rng),
            c: (0..t).map(|_| random_vec(h, &mut rng)).collect(),
            reversed: seed % 2 == 1,
        }
    }
}

impl Differentiable for LstmCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.layer.parameters_mut();
        p.extend(self.xs.iter_mut());
        p
    }

    fn value(&mut self) -> Result<f64> {
        let trace = self.layer.forward(&values(&self.xs), self.reversed)?;
        Ok(trace.hidden_states().iter().zip(&self.c).map(|(h, c)| dot(h, c)).sum())
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        let trace = self.layer.forward(&values(&self.xs), self.reversed)?;
        let v = trace.hidden_states().iter().zip(&self.c).map(|(h, c)| dot(h, c)).sum();
        let dx = self.layer.backward(&trace, &self.c);
        add_grads(&mut self.xs, &dx);
        Ok(v)
    }
}

/// Stacked bi-LSTM in train mode with a fixed dropout mask between layers,
/// scored on both the top states and the sentence encoding.
pub struct BiLstmCase {
    net: BiLstm,
    xs: Vec<Parameter>,
    c_top: Vec<Vec<f64>>,
    c_enc: Vec<f64>,
    dropout: f64,
    mask_seed: u64,
}

impl BiLstmCase {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, h, t, layers) = (
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
            rng.gen_range(1..4),
        );
        BiLstmCase {
            net: BiLstm::new("bi", i, h, layers, &mut rng),
            xs: sequence_params(t, i, &mut rng),
            c_top: (0..t).map(|_| random_vec(2 * h, &mut rng)).collect(),
            c_enc: random_vec(2 * h, &mut rng),
            dropout: 0.3,
            mask_seed: seed,
        }
    }

    fn run(&self) -> Result<(happiness_core::nn::BiLstmTrace, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.mask_seed);
        let trace = self.net.forward(&values(&self.xs), self.dropout, Mode::Train, &mut rng)?;
        let v = trace.top_states().iter().zip(&self.c_top).map(|(h, c)| dot(h, c)).sum::<f64>()
            + dot(&trace.encoding(), &self.c_enc);
        Ok((trace, v))
    }
}

impl Differentiable for BiLstmCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.net.parameters_mut();
        p.extend(self.xs.iter_mut());
        p
    }

    fn value(&mut self) -> Result<f64> {
        Ok(self.run()?.1)
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        let (trace, v) = self.run()?;
        let mut d_top = trace.encoding_grad_to_top(&self.c_enc);
        for (d, c) in d_top.iter_mut().zip(&self.c_top) {
            for (a, b) in d.iter_mut().zip(c) {
                *a += b;
            }
        }
        let dx = self.net.backward(&trace, d_top);
        add_grads(&mut self.xs, &dx);
        Ok(v)
    }
}

/// Which slice of the entailment model's parameters is being checked.
#[derive(Clone, Copy, Debug)]
pub enum HerPart {
    FeatureEncoders,
    Head,
    Everything,
}

/// Cross-entropy of the full entailment model on one short pair.
pub struct HerCase {
    model: HerModel,
    moment: String,
    suggestion: String,
    label: usize,
    part: HerPart,
}

impl HerCase {
    pub fn new(seed: u64, part: HerPart) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let suite: FeatureSuite = random_feature_suite(&mut rng);
        let config = tiny_her_config(seed, FeatureFlags::ALL);
        let model = HerModel::new(config, word_vocab(), None, Some(suite)).unwrap();
        HerCase {
            model,
            moment: random_phrase(2, &mut rng),
            suggestion: random_phrase(2, &mut rng),
            label: rng.gen_range(0..2),
            part,
        }
    }
}

impl Differentiable for HerCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let m = &mut self.model;
        match self.part {
            HerPart::FeatureEncoders => [&mut m.concept_encoder, &mut m.agency_encoder, &mut m.sociality_encoder]
                .into_iter()
                .flatten()
                .flat_map(|l| l.parameters_mut())
                .collect(),
            HerPart::Head => {
                let mut p = m.merge_layer.parameters_mut();
                p.extend(m.output_layer.parameters_mut());
                p
            }
            HerPart::Everything => m.all_parameters_mut(),
        }
    }

    fn value(&mut self) -> Result<f64> {
        self.model.loss(&self.moment, &self.suggestion, self.label)
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        self.model.zero_grad();
        self.model.loss_and_grad(&self.moment, &self.suggestion, self.label)
    }
}

pub struct AttentionCase {
    attention: SelfAttention,
    xs: Vec<Parameter>,
    c: Vec<f64>,
}

impl AttentionCase {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, a, t) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
        AttentionCase {
            attention: SelfAttention::new("att", d, a, &mut rng),
            xs: sequence_params(t, d, &mut rng),
            c: random_vec(d, &mut rng),
        }
    }
}

impl Differentiable for AttentionCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.attention.parameters_mut();
        p.extend(self.xs.iter_mut());
        p
    }

    fn value(&mut self) -> Result<f64> {
        Ok(dot(&self.attention.forward(&values(&self.xs))?.output.vector, &self.c))
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        let trace = self.attention.forward(&values(&self.xs))?;
        let v = dot(&trace.output.vector, &self.c);
        let dx = self.attention.backward(&trace, &self.c);
        add_grads(&mut self.xs, &dx);
        Ok(v)
    }
}

pub struct AttentionClassifierCase {
    model: AttentionClassifier,
    text: String,
    positive: bool,
}

impl AttentionClassifierCase {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = SuggestibilityConfig {
            embed_dim: 3,
            hidden_dim: 3,
            attention_dim: 2,
            ..SuggestibilityConfig::default()
        };
        let vocab: Vocab = word_vocab();
        AttentionClassifierCase {
            model: AttentionClassifier::new(vocab, &config, &mut rng).unwrap(),
            text: random_phrase(3, &mut rng),
            positive: rng.gen(),
        }
    }
}

impl Differentiable for AttentionClassifierCase {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.parameters_mut()
    }

    fn value(&mut self) -> Result<f64> {
        self.model.loss(&self.text, self.positive)
    }

    fn value_and_grad(&mut self) -> Result<f64> {
        self.model.loss_and_grad(&self.text, self.positive)
    }
}

/// Largest relative error over `SEEDS` instances built by `make`.
pub fn worst_over_seeds<D: Differentiable, F: Fn(u64) -> D>(make: F) -> f64 {
    (0..SEEDS)
        .map(|s| grad_check(&mut make(s), EPS).expect("gradient check ran"))
        .fold(0.0, f64::max)
}
