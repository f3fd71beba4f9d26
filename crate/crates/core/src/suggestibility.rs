//! Mining repeatable, sustainable activity suggestions from happy moments.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::VOTES_PER_TASK;
use crate::error::{Error, Result};
use crate::features::{build_feature_vocab, featurize_bow, train_logreg, LogRegModel, LogRegParams, FEATURE_VOCAB_SIZE};
use crate::nn::{
    apply_mask, binary_class_loss, dot, dropout_with_mask, entailment_probability, AdamState, BiLstm, BiLstmTrace,
    HasParameters, Linear, Mode, NoRng, Parameter,
};
use crate::text::{tokenize, EmbeddingTable, Vocab, DEFAULT_VOCAB_SIZE};

const DEFAULT_VERB_FORMS: &str = include_str!("../data/verb_forms.txt");

/// Conjugated verb forms and modals used to spot activities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbLexicon {
    forms: HashSet<String>,
}

impl Default for VerbLexicon {
    fn default() -> Self {
        VerbLexicon::from_words(DEFAULT_VERB_FORMS.lines())
    }
}

impl VerbLexicon {
    /// Lowercases each word; blank lines and `#` comments are skipped.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let forms = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .collect();
        VerbLexicon { forms }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.forms.contains(token)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

/// Number of maximal runs of consecutive lexicon tokens.
pub fn count_activities(text: &str, lexicon: &VerbLexicon) -> usize {
    let mut runs = 0;
    let mut inside = false;
    for token in tokenize(text) {
        let hit = lexicon.contains(&token);
        if hit && !inside {
            runs += 1;
        }
        inside = hit;
    }
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestibilityLabel {
    Suggestible,
    NotSuggestible,
}

impl SuggestibilityLabel {
    pub fn is_positive(self) -> bool {
        self == SuggestibilityLabel::Suggestible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestibilityAggregate {
    Suggestible,
    NotSuggestible,
    Excluded,
}

impl SuggestibilityAggregate {
    pub fn label(self) -> Option<SuggestibilityLabel> {
        match self {
            SuggestibilityAggregate::Suggestible => Some(SuggestibilityLabel::Suggestible),
            SuggestibilityAggregate::NotSuggestible => Some(SuggestibilityLabel::NotSuggestible),
            SuggestibilityAggregate::Excluded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestibilityVotes {
    pub repeatable: [bool; VOTES_PER_TASK],
    pub sustainable: [bool; VOTES_PER_TASK],
}

const AGREEMENT: usize = 4;

/// Suggestible when both criteria get at least four yes votes, not
/// suggestible when either gets at least four no votes.
pub fn aggregate_suggestibility(votes: &SuggestibilityVotes) -> SuggestibilityAggregate {
    let yes = |v: &[bool; VOTES_PER_TASK]| v.iter().filter(|&&b| b).count();
    let (r, s) = (yes(&votes.repeatable), yes(&votes.sustainable));
    let no = |n: usize| VOTES_PER_TASK - n >= AGREEMENT;
    if r >= AGREEMENT && s >= AGREEMENT {
        SuggestibilityAggregate::Suggestible
    } else if no(r) || no(s) {
        SuggestibilityAggregate::NotSuggestible
    } else {
        SuggestibilityAggregate::Excluded
    }
}

/// One crowd-annotated happy moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestibilityTask {
    pub text: String,
    #[serde(flatten)]
    pub votes: SuggestibilityVotes,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuggestibilityExample {
    pub text: String,
    pub label: SuggestibilityLabel,
}

/// Keeps the tasks whose votes reach agreement; returns the examples and
/// the number excluded.
pub fn aggregate_suggestibility_tasks(tasks: &[SuggestibilityTask]) -> (Vec<SuggestibilityExample>, usize) {
    let mut excluded = 0;
    let examples = tasks
        .iter()
        .filter_map(|t| match aggregate_suggestibility(&t.votes).label() {
            Some(label) => Some(SuggestibilityExample {
                text: t.text.clone(),
                label,
            }),
            None => {
                excluded += 1;
                None
            }
        })
        .collect();
    (examples, excluded)
}

/// Weighted average of hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub vector: Vec<f64>,
    /// One non-negative weight per position, summing to one.
    pub weights: Vec<f64>,
}

/// Scores each state as `w · tanh(W h + b)` and softmaxes over positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAttention {
    pub projection: Linear,
    pub score: Parameter,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub output: AttentionOutput,
    states: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

impl SelfAttention {
    pub fn new<R: Rng + ?Sized>(name: &str, state_dim: usize, attention_dim: usize, rng: &mut R) -> Self {
        SelfAttention {
            projection: Linear::new(&format!("{name}.projection"), state_dim, attention_dim, rng),
            score: Parameter::fan_in_uniform(format!("{name}.score"), attention_dim, 1, attention_dim, rng),
        }
    }

    pub fn zeros(name: &str, state_dim: usize, attention_dim: usize) -> Self {
        SelfAttention {
            projection: Linear::zeros(&format!("{name}.projection"), state_dim, attention_dim),
            score: Parameter::zeros(format!("{name}.score"), attention_dim, 1),
        }
    }

    pub fn forward(&self, states: &[Vec<f64>]) -> Result<AttentionTrace> {
        if states.is_empty() {
            return Err(Error::EmptyInput("attention input states"));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) || dim != self.projection.input_dim() {
            return Err(Error::shape(format!(
                "attention expects states of width {}",
                self.projection.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(states.len());
        let mut scores = Vec::with_capacity(states.len());
        for h in states {
            let z: Vec<f64> = self.projection.forward(h)?.into_iter().map(f64::tanh).collect();
            scores.push(dot(self.score.value.as_slice(), &z));
            activations.push(z);
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let weights: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut vector = vec![0.0; dim];
        for (h, &a) in states.iter().zip(&weights) {
            for (o, x) in vector.iter_mut().zip(h) {
                *o += a * x;
            }
        }
        Ok(AttentionTrace {
            output: AttentionOutput { vector, weights },
            states: states.to_vec(),
            activations,
        })
    }

    /// Accumulates parameter gradients and returns the gradient with
    /// respect to each input state.
    pub fn backward(&mut self, trace: &AttentionTrace, d_vector: &[f64]) -> Vec<Vec<f64>> {
        let weights = &trace.output.weights;
        let d_weights: Vec<f64> = trace.states.iter().map(|h| dot(h, d_vector)).collect();
        let mean = dot(weights, &d_weights);
        let mut d_states = Vec::with_capacity(trace.states.len());
        for t in 0..trace.states.len() {
            let a = weights[t];
            let d_score = a * (d_weights[t] - mean);
            let z = &trace.activations[t];
            let d_pre: Vec<f64> = z
                .iter()
                .zip(self.score.value.as_slice())
                .map(|(zi, wi)| d_score * wi * (1.0 - zi * zi))
                .collect();
            for (g, zi) in self.score.grad.as_mut_slice().iter_mut().zip(z) {
                *g += d_score * zi;
            }
            let mut dh = self.projection.backward(&trace.states[t], &d_pre);
            for (d, v) in dh.iter_mut().zip(d_vector) {
                *d += a * v;
            }
            d_states.push(dh);
        }
        d_states
    }
}

impl HasParameters for SelfAttention {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut out = self.projection.parameters();
        out.push(&self.score);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.projection.parameters_mut();
        out.push(&mut self.score);
        out
    }
}

pub fn self_attention_encode(states: &[Vec<f64>], attention: &SelfAttention) -> Result<AttentionOutput> {
    Ok(attention.forward(states)?.output)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logreg,
    BilstmAttention,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ClassifierKind::Logreg),
            "bilstm_attention" | "bilstm-attention" => Ok(ClassifierKind::BilstmAttention),
            other => Err(Error::Config(format!("unknown classifier kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggestibilityConfig {
    pub logreg: LogRegParams,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub attention_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for SuggestibilityConfig {
    fn default() -> Self {
        SuggestibilityConfig {
            logreg: LogRegParams::default(),
            vocab_size: DEFAULT_VOCAB_SIZE,
            embed_dim: 50,
            hidden_dim: 64,
            num_layers: 1,
            attention_dim: 32,
            dropout: 0.2,
            learning_rate: 5e-3,
            batch_size: 16,
            epochs: 15,
        }
    }
}

impl SuggestibilityConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("attention_dim", self.attention_dim),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidRate(self.dropout));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Bi-LSTM over word embeddings, self-attention pooling, two-way softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionClassifier {
    pub vocab: Vocab,
    pub embeddings: EmbeddingTable,
    pub encoder: BiLstm,
    pub attention: SelfAttention,
    pub output: Linear,
    pub dropout: f64,
}

struct ClassifierTrace {
    ids: Vec<usize>,
    lstm: BiLstmTrace,
    attention: AttentionTrace,
    dropped: Vec<f64>,
    mask: Option<Vec<f64>>,
    logits: [f64; 2],
}

impl AttentionClassifier {
    pub fn new<R: Rng + ?Sized>(vocab: Vocab, config: &SuggestibilityConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let embeddings = EmbeddingTable::random(vocab.len(), config.embed_dim, rng);
        let encoder = BiLstm::new("encoder", config.embed_dim, config.hidden_dim, config.num_layers, rng);
        let attention = SelfAttention::new("attention", encoder.output_dim(), config.attention_dim, rng);
        let output = Linear::new("output", encoder.output_dim(), 2, rng);
        Ok(AttentionClassifier {
            vocab,
            embeddings,
            encoder,
            attention,
            output,
            dropout: config.dropout,
        })
    }

    fn forward_ids<R: Rng + ?Sized>(&self, ids: &[usize], mode: Mode, rng: &mut R) -> Result<ClassifierTrace> {
        let seq = self.embeddings.lookup(ids);
        let lstm = self.encoder.forward(&seq, self.dropout, mode, rng)?;
        let attention = self.attention.forward(lstm.top_states())?;
        let (dropped, mask) = dropout_with_mask(&attention.output.vector, self.dropout, mode, rng)?;
        let out = self.output.forward(&dropped)?;
        Ok(ClassifierTrace {
            ids: ids.to_vec(),
            lstm,
            attention,
            dropped,
            mask,
            logits: [out[0], out[1]],
        })
    }

    fn backward(&mut self, trace: &ClassifierTrace, label: usize, scale: f64) -> f64 {
        let (loss, d_logits) = binary_class_loss(trace.logits, label);
        let d_logits = [d_logits[0] * scale, d_logits[1] * scale];
        let d_dropped = self.output.backward(&trace.dropped, &d_logits);
        let d_vector = apply_mask(&d_dropped, trace.mask.as_ref());
        let d_top = self.attention.backward(&trace.attention, &d_vector);
        let d_inputs = self.encoder.backward(&trace.lstm, d_top);
        self.embeddings.accumulate_grad(&trace.ids, &d_inputs);
        loss
    }

    fn ids(&self, text: &str) -> Vec<usize> {
        self.vocab.encode(&tokenize(text))
    }

    /// Eval-mode P(suggestible).
    pub fn probability(&self, text: &str) -> Result<f64> {
        Ok(entailment_probability(self.forward_ids(&self.ids(text), Mode::Eval, &mut NoRng)?.logits))
    }

    /// Attention weights over the tokens of `text`.
    pub fn attend(&self, text: &str) -> Result<AttentionOutput> {
        Ok(self.forward_ids(&self.ids(text), Mode::Eval, &mut NoRng)?.attention.output)
    }

    /// Eval-mode cross-entropy with gradients added to every parameter.
    pub fn loss_and_grad(&mut self, text: &str, positive: bool) -> Result<f64> {
        let trace = self.forward_ids(&self.ids(text), Mode::Eval, &mut NoRng)?;
        Ok(self.backward(&trace, usize::from(positive), 1.0))
    }

    pub fn loss(&self, text: &str, positive: bool) -> Result<f64> {
        let logits = self.forward_ids(&self.ids(text), Mode::Eval, &mut NoRng)?.logits;
        Ok(binary_class_loss(logits, usize::from(positive)).0)
    }
}

impl HasParameters for AttentionClassifier {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.embeddings.table];
        out.extend(self.encoder.parameters());
        out.extend(self.attention.parameters());
        out.extend(self.output.parameters());
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.embeddings.table];
        out.extend(self.encoder.parameters_mut());
        out.extend(self.attention.parameters_mut());
        out.extend(self.output.parameters_mut());
        out
    }
}

/// A trained suggestibility classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuggestibilityModel {
    Logreg { vocab: Vocab, model: LogRegModel },
    BilstmAttention(Box<AttentionClassifier>),
}

impl SuggestibilityModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            SuggestibilityModel::Logreg { .. } => ClassifierKind::Logreg,
            SuggestibilityModel::BilstmAttention(_) => ClassifierKind::BilstmAttention,
        }
    }

    /// P(suggestible).
    pub fn score(&self, text: &str) -> Result<f64> {
        match self {
            SuggestibilityModel::Logreg { vocab, model } => Ok(model.probability(&featurize_bow(&tokenize(text), vocab))),
            SuggestibilityModel::BilstmAttention(m) => m.probability(text),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Trains the chosen classifier on all of `examples`; splitting is left to
/// the caller.
pub fn train_suggestibility<R: Rng + ?Sized>(
    examples: &[SuggestibilityExample],
    kind: ClassifierKind,
    config: &SuggestibilityConfig,
    rng: &mut R,
) -> Result<SuggestibilityModel> {
    config.validate()?;
    let positives = examples.iter().filter(|e| e.label.is_positive()).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::DegenerateData(format!(
            "suggestibility: need both classes, got {positives} suggestible of {}",
            examples.len()
        )));
    }
    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    match kind {
        ClassifierKind::Logreg => {
            let vocab = build_feature_vocab(&texts, FEATURE_VOCAB_SIZE)?;
            let data: Vec<_> = examples
                .iter()
                .map(|e| (featurize_bow(&tokenize(&e.text), &vocab), e.label.is_positive()))
                .collect();
            let model = train_logreg("suggestible", &data, vocab.len(), &config.logreg)?;
            Ok(SuggestibilityModel::Logreg { vocab, model })
        }
        ClassifierKind::BilstmAttention => {
            let vocab = Vocab::build(texts.iter().map(|t| tokenize(t)), config.vocab_size)?;
            let mut model = AttentionClassifier::new(vocab, config, rng)?;
            let data: Vec<(Vec<usize>, usize)> = examples
                .iter()
                .map(|e| (model.ids(&e.text), usize::from(e.label.is_positive())))
                .collect();
            let mut adam = AdamState::new(config.learning_rate);
            let mut order: Vec<usize> = (0..data.len()).collect();
            for epoch in 0..config.epochs {
                order.shuffle(rng);
                let mut total = 0.0;
                for batch in order.chunks(config.batch_size) {
                    model.zero_grad();
                    let scale = 1.0 / batch.len() as f64;
                    for &i in batch {
                        let trace = model.forward_ids(&data[i].0, Mode::Train, rng)?;
                        total += model.backward(&trace, data[i].1, scale);
                    }
                    adam.update(&mut model.parameters_mut())?;
                }
                if !total.is_finite() {
                    return Err(Error::Numeric(format!("suggestibility loss at epoch {epoch}")));
                }
            }
            model.zero_grad();
            Ok(SuggestibilityModel::BilstmAttention(Box::new(model)))
        }
    }
}

/// A mined suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

pub const DEFAULT_DEDUPE_JACCARD: f64 = 0.8;

/// Jaccard similarity of the two token sets; two empty sets count as equal.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = tokenize(a).into_iter().collect();
    let sb: BTreeSet<String> = tokenize(b).into_iter().collect();
    jaccard(&sa, &sb)
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// [`filter_corpus_with`] using the shipped verb lexicon.
pub fn filter_corpus<S: AsRef<str> + Sync>(
    corpus: &[S],
    model: &SuggestibilityModel,
    threshold: f64,
    dedupe_jaccard: f64,
) -> Result<Vec<Candidate>> {
    filter_corpus_with(corpus, model, &VerbLexicon::default(), threshold, dedupe_jaccard)
}

/// Keeps single-activity moments scoring at least `threshold`, visits them
/// from highest score down (corpus order on ties) and drops any whose token
/// Jaccard with an already kept candidate reaches `dedupe_jaccard`.
pub fn filter_corpus_with<S: AsRef<str> + Sync>(
    corpus: &[S],
    model: &SuggestibilityModel,
    lexicon: &VerbLexicon,
    threshold: f64,
    dedupe_jaccard: f64,
) -> Result<Vec<Candidate>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&dedupe_jaccard) {
        return Err(Error::Config(format!("dedupe fraction {dedupe_jaccard} must lie in [0, 1]")));
    }
    let gated: Vec<&str> = corpus
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| count_activities(t, lexicon) == 1)
        .collect();
    let scores = score_parallel(&gated, model)?;
    let mut passed: Vec<Candidate> = gated
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| *s >= threshold)
        .map(|(t, score)| Candidate {
            text: t.to_string(),
            score,
        })
        .collect();
    passed.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut kept: Vec<Candidate> = Vec::new();
    let mut kept_sets: Vec<BTreeSet<String>> = Vec::new();
    for c in passed {
        let set: BTreeSet<String> = tokenize(&c.text).into_iter().collect();
        if kept_sets.iter().all(|k| jaccard(k, &set) < dedupe_jaccard) {
            kept_sets.push(set);
            kept.push(c);
        }
    }
    Ok(kept)
}

fn score_parallel(texts: &[&str], model: &SuggestibilityModel) -> Result<Vec<f64>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    if texts.len() < 32 || workers == 1 {
        return texts.iter().map(|t| model.score(t)).collect();
    }
    let chunk = texts.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = texts
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|t| model.score(t)).collect::<Result<Vec<f64>>>()))
            .collect();
        let mut out = Vec::with_capacity(texts.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread panicked")?);
        }
        Ok(out)
    })
}
