use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::HerConfig;
use crate::error::{Error, Result};
use crate::features::{Concept, FeatureSuite, Side};
use crate::nn::{
    apply_mask, binary_class_loss, dropout_with_mask, entailment_probability, relu, relu_backward, BiLstm,
    BiLstmTrace, HasParameters, Linear, Mode, NoRng, Parameter,
};
use crate::text::{tokenize, EmbeddingTable, Vocab};

/// Concatenates `[u, v, u - v, u * v]`.
pub fn merge(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::shape(format!("cannot merge vectors of length {} and {}", u.len(), v.len())));
    }
    let mut out = Vec::with_capacity(4 * u.len());
    out.extend_from_slice(u);
    out.extend_from_slice(v);
    out.extend(u.iter().zip(v).map(|(a, b)| a - b));
    out.extend(u.iter().zip(v).map(|(a, b)| a * b));
    Ok(out)
}

fn merge_backward(u: &[f64], v: &[f64], d: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let (du_direct, rest) = d.split_at(n);
    let (dv_direct, rest) = rest.split_at(n);
    let (d_diff, d_prod) = rest.split_at(n);
    let du = (0..n).map(|k| du_direct[k] + d_diff[k] + d_prod[k] * v[k]).collect();
    let dv = (0..n).map(|k| dv_direct[k] - d_diff[k] + d_prod[k] * u[k]).collect();
    (du, dv)
}

/// Token ids and feature values for one side of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInput {
    pub ids: Vec<usize>,
    pub concept: Option<Vec<f64>>,
    pub agency: Option<f64>,
    pub sociality: Option<f64>,
}

/// Encoded moment `u`, encoded suggestion `v` and their merge.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub merged: Vec<f64>,
}

struct FeatureTrace {
    input: Vec<f64>,
    pre: Vec<f64>,
}

struct SideTrace {
    ids: Vec<usize>,
    lstm: BiLstmTrace,
    concept: Option<FeatureTrace>,
    agency: Option<FeatureTrace>,
    sociality: Option<FeatureTrace>,
    encoded: Vec<f64>,
}

pub(crate) struct PairTrace {
    moment: SideTrace,
    suggestion: SideTrace,
    dropped: Vec<f64>,
    mask: Option<Vec<f64>>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub(crate) logits: [f64; 2],
}

/// Dual encoder with a shared bi-LSTM sentence encoder, optional shared
/// feature encoders, a merge-stage hidden layer and a two-class output.
#[derive(Debug, Clone, PartialEq)]
pub struct HerModel {
    pub config: HerConfig,
    pub vocab: Vocab,
    pub embeddings: EmbeddingTable,
    pub encoder: BiLstm,
    pub concept_encoder: Option<Linear>,
    pub agency_encoder: Option<Linear>,
    pub sociality_encoder: Option<Linear>,
    pub merge_layer: Linear,
    pub output_layer: Linear,
    pub features: Option<FeatureSuite>,
}

impl HerModel {
    /// Builds a freshly initialized model. Without `embeddings` the table is
    /// drawn at random; enabled feature flags require the matching
    /// classifiers in `features`.
    pub fn new(
        config: HerConfig,
        vocab: Vocab,
        embeddings: Option<EmbeddingTable>,
        features: Option<FeatureSuite>,
    ) -> Result<Self> {
        config.validate()?;
        let flags = config.features;
        let suite = features.as_ref();
        if flags.concept && suite.and_then(|s| s.concepts.as_ref()).is_none() {
            return Err(Error::Config("concept feature enabled without concept classifiers".into()));
        }
        if flags.agency && suite.and_then(|s| s.agency.as_ref()).is_none() {
            return Err(Error::Config("agency feature enabled without an agency classifier".into()));
        }
        if flags.sociality && suite.and_then(|s| s.sociality.as_ref()).is_none() {
            return Err(Error::Config("sociality feature enabled without a sociality classifier".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embeddings = match embeddings {
            Some(e) => {
                if e.rows() != vocab.len() || e.dim != config.embed_dim {
                    return Err(Error::shape(format!(
                        "embedding table is {}x{}, expected {}x{}",
                        e.rows(),
                        e.dim,
                        vocab.len(),
                        config.embed_dim
                    )));
                }
                e
            }
            None => EmbeddingTable::random(vocab.len(), config.embed_dim, &mut rng),
        };
        let encoder = BiLstm::new("encoder", config.embed_dim, config.hidden_dim, config.num_layers, &mut rng);
        let fdim = config.feature_encoder_dim;
        let concept_encoder = flags
            .concept
            .then(|| Linear::new("feature.concept", Concept::COUNT, fdim, &mut rng));
        let agency_encoder = flags.agency.then(|| Linear::new("feature.agency", 1, fdim, &mut rng));
        let sociality_encoder = flags
            .sociality
            .then(|| Linear::new("feature.sociality", 1, fdim, &mut rng));
        let merge_layer = Linear::new("merge", 4 * config.encoded_dim(), config.merge_hidden_dim, &mut rng);
        let output_layer = Linear::new("output", config.merge_hidden_dim, 2, &mut rng);
        Ok(HerModel {
            config,
            vocab,
            embeddings,
            encoder,
            concept_encoder,
            agency_encoder,
            sociality_encoder,
            merge_layer,
            output_layer,
            features,
        })
    }

    pub fn encoded_dim(&self) -> usize {
        self.config.encoded_dim()
    }

    /// Tokenizes `text` and computes the enabled feature values.
    pub fn prepare(&self, text: &str, side: Side) -> EncoderInput {
        let ids = self.vocab.encode(&tokenize(text));
        let flags = self.config.features;
        let annotated = match &self.features {
            Some(suite) if flags.any() => Some(suite.annotate(text, side)),
            _ => None,
        };
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        let (concept, agency, sociality) = match annotated {
            Some(a) => (
                if flags.concept { a.concepts.map(|c| c.as_f64()) } else { None },
                if flags.agency { a.agency.map(bit) } else { None },
                if flags.sociality { a.sociality.map(bit) } else { None },
            ),
            None => (None, None, None),
        };
        EncoderInput {
            ids,
            concept,
            agency,
            sociality,
        }
    }

    fn forward_side<R: Rng + ?Sized>(&self, input: &EncoderInput, mode: Mode, rng: &mut R) -> Result<SideTrace> {
        let seq = self.embeddings.lookup(&input.ids);
        let lstm = self.encoder.forward(&seq, self.config.dropout, mode, rng)?;
        let mut encoded = lstm.encoding();
        let mut run = |enc: &Option<Linear>, value: Option<Vec<f64>>, what: &str| -> Result<Option<FeatureTrace>> {
            match enc {
                None => Ok(None),
                Some(layer) => {
                    let x = value.ok_or_else(|| Error::Config(format!("missing {what} feature value")))?;
                    let pre = layer.forward(&x)?;
                    encoded.extend(relu(&pre));
                    Ok(Some(FeatureTrace { input: x, pre }))
                }
            }
        };
        let concept = run(&self.concept_encoder, input.concept.clone(), "concept")?;
        let agency = run(&self.agency_encoder, input.agency.map(|a| vec![a]), "agency")?;
        let sociality = run(&self.sociality_encoder, input.sociality.map(|s| vec![s]), "sociality")?;
        Ok(SideTrace {
            ids: input.ids.clone(),
            lstm,
            concept,
            agency,
            sociality,
            encoded,
        })
    }

    /// Encodes one text into its side vector.
    pub fn encode_input(&self, text: &str, side: Side) -> Result<Vec<f64>> {
        let input = self.prepare(text, side);
        Ok(self.forward_side(&input, Mode::Eval, &mut NoRng)?.encoded)
    }

    pub fn encode_pair(&self, moment: &str, suggestion: &str) -> Result<EncodedPair> {
        let u = self.encode_input(moment, Side::Moment)?;
        let v = self.encode_input(suggestion, Side::Suggestion)?;
        let merged = merge(&u, &v)?;
        Ok(EncodedPair { u, v, merged })
    }

    pub(crate) fn forward_prepared<R: Rng + ?Sized>(
        &self,
        moment: &EncoderInput,
        suggestion: &EncoderInput,
        mode: Mode,
        rng: &mut R,
    ) -> Result<PairTrace> {
        let m = self.forward_side(moment, mode, rng)?;
        let s = self.forward_side(suggestion, mode, rng)?;
        self.head_forward(m, s, mode, rng)
    }

    fn head_forward<R: Rng + ?Sized>(&self, m: SideTrace, s: SideTrace, mode: Mode, rng: &mut R) -> Result<PairTrace> {
        let merged = merge(&m.encoded, &s.encoded)?;
        let (dropped, mask) = dropout_with_mask(&merged, self.config.dropout, mode, rng)?;
        let hidden_pre = self.merge_layer.forward(&dropped)?;
        let hidden = relu(&hidden_pre);
        let out = self.output_layer.forward(&hidden)?;
        Ok(PairTrace {
            moment: m,
            suggestion: s,
            dropped,
            mask,
            hidden_pre,
            hidden,
            logits: [out[0], out[1]],
        })
    }

    /// Loss for one labeled pair, with `scale · ∂loss` accumulated into the
    /// parameter gradients.
    pub(crate) fn backward(&mut self, trace: &PairTrace, label: usize, scale: f64) -> f64 {
        let (loss, d_logits) = binary_class_loss(trace.logits, label);
        let d_logits = [d_logits[0] * scale, d_logits[1] * scale];
        let d_hidden = self.output_layer.backward(&trace.hidden, &d_logits);
        let d_pre = relu_backward(&trace.hidden_pre, &d_hidden);
        let d_dropped = self.merge_layer.backward(&trace.dropped, &d_pre);
        let d_merged = apply_mask(&d_dropped, trace.mask.as_ref());
        let (du, dv) = merge_backward(&trace.moment.encoded, &trace.suggestion.encoded, &d_merged);
        self.backward_side(&trace.moment, &du);
        self.backward_side(&trace.suggestion, &dv);
        loss
    }

    fn backward_side(&mut self, side: &SideTrace, d_encoded: &[f64]) {
        let base = 2 * self.config.hidden_dim;
        let fdim = self.config.feature_encoder_dim;
        let mut offset = base;
        for (enc, tr) in [
            (&mut self.concept_encoder, &side.concept),
            (&mut self.agency_encoder, &side.agency),
            (&mut self.sociality_encoder, &side.sociality),
        ] {
            if let (Some(layer), Some(tr)) = (enc.as_mut(), tr) {
                let d_pre = relu_backward(&tr.pre, &d_encoded[offset..offset + fdim]);
                layer.backward(&tr.input, &d_pre);
                offset += fdim;
            }
        }
        let d_top = side.lstm.encoding_grad_to_top(&d_encoded[..base]);
        let d_inputs = self.encoder.backward(&side.lstm, d_top);
        self.embeddings.accumulate_grad(&side.ids, &d_inputs);
    }

    /// Eval-mode cross-entropy for one labeled pair (label 1 = entailment);
    /// its gradient is added to every parameter's `grad`.
    pub fn loss_and_grad(&mut self, moment: &str, suggestion: &str, label: usize) -> Result<f64> {
        let m = self.prepare(moment, Side::Moment);
        let s = self.prepare(suggestion, Side::Suggestion);
        let trace = self.forward_prepared(&m, &s, Mode::Eval, &mut NoRng)?;
        Ok(self.backward(&trace, label, 1.0))
    }

    /// Eval-mode cross-entropy without gradients.
    pub fn loss(&self, moment: &str, suggestion: &str, label: usize) -> Result<f64> {
        let m = self.prepare(moment, Side::Moment);
        let s = self.prepare(suggestion, Side::Suggestion);
        let logits = self.forward_prepared(&m, &s, Mode::Eval, &mut NoRng)?.logits;
        Ok(binary_class_loss(logits, label).0)
    }

    /// P(entailment) for a pair.
    pub fn her_forward<R: Rng + ?Sized>(&self, moment: &str, suggestion: &str, mode: Mode, rng: &mut R) -> Result<f64> {
        let m = self.prepare(moment, Side::Moment);
        let s = self.prepare(suggestion, Side::Suggestion);
        Ok(entailment_probability(self.forward_prepared(&m, &s, mode, rng)?.logits))
    }

    /// Eval-mode P(entailment); deterministic.
    pub fn predict(&self, moment: &str, suggestion: &str) -> Result<f64> {
        self.her_forward(moment, suggestion, Mode::Eval, &mut NoRng)
    }

    pub(crate) fn predict_prepared(&self, moment: &EncoderInput, suggestion: &EncoderInput) -> Result<f64> {
        Ok(entailment_probability(
            self.forward_prepared(moment, suggestion, Mode::Eval, &mut NoRng)?.logits,
        ))
    }

    /// Every parameter including a frozen embedding table, in checkpoint
    /// order.
    pub fn all_parameters(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.embeddings.table];
        out.extend(self.encoder.parameters());
        for enc in [&self.concept_encoder, &self.agency_encoder, &self.sociality_encoder]
            .into_iter()
            .flatten()
        {
            out.extend(enc.parameters());
        }
        out.extend(self.merge_layer.parameters());
        out.extend(self.output_layer.parameters());
        out
    }

    pub fn all_parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.embeddings.table];
        out.extend(self.encoder.parameters_mut());
        for enc in [
            &mut self.concept_encoder,
            &mut self.agency_encoder,
            &mut self.sociality_encoder,
        ]
        .into_iter()
        .flatten()
        {
            out.extend(enc.parameters_mut());
        }
        out.extend(self.merge_layer.parameters_mut());
        out.extend(self.output_layer.parameters_mut());
        out
    }
}

impl HasParameters for HerModel {
    /// Trainable parameters; a frozen embedding table is left out.
    fn parameters(&self) -> Vec<&Parameter> {
        let mut all = self.all_parameters();
        if !self.embeddings.trainable {
            all.remove(0);
        }
        all
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let trainable = self.embeddings.trainable;
        let mut all = self.all_parameters_mut();
        if !trainable {
            all.remove(0);
        }
        all
    }
}
