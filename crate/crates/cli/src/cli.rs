//! Command-line pipeline: one subcommand per stage.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use happiness_core::datasets::{
    aggregate_tasks, balance_and_split, load_annotations, load_examples, save_annotations, save_examples, HerExample,
    SplitRatios,
};
use happiness_core::eval::search::write_trial_log;
use happiness_core::eval::{accuracy, au_roc, random_search, SearchSpace};
use happiness_core::features::{
    binary_examples, build_feature_vocab, concept_examples, load_labeled_corpus, train_binary_feature,
    ConceptClassifier, FeatureSuite, LogRegParams, FEATURE_VOCAB_SIZE,
};
use happiness_core::her::{
    build_her_vocab, checkpoint_bytes, load_checkpoint, score_examples, train_her, HerConfig, HerModel,
    TrainingHistory,
};
use happiness_core::jsonl::{read_jsonl, write_jsonl};
use happiness_core::suggestibility::{
    aggregate_suggestibility, aggregate_suggestibility_tasks, filter_corpus, train_suggestibility, ClassifierKind,
    SuggestibilityConfig, SuggestibilityExample, SuggestibilityModel, SuggestibilityTask, DEFAULT_DEDUPE_JACCARD,
};
use happiness_core::text::load_embeddings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::db::SuggestionDb;
use crate::feedback::FeedbackLog;
use crate::service::{self, AppState, SuggestRequest};

#[derive(Debug, Parser)]
#[command(name = "happiness", version, about = "Happiness-entailment pipeline and suggestion service")]
pub struct Cli {
    /// Random seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn crowd votes into labeled examples.
    Aggregate(AggregateArgs),
    /// Train the entailment model.
    Train(TrainArgs),
    /// Report AU-ROC and accuracy of a model on labeled pairs.
    Eval(EvalArgs),
    /// Score one pair or rank the suggestion database for a moment.
    Predict(PredictArgs),
    /// Random hyperparameter search scored by validation AU-ROC.
    Hpo(HpoArgs),
    /// Mine suggestion candidates from a corpus of moments.
    FilterCorpus(FilterArgs),
    /// Train the suggestibility classifier used by filter-corpus.
    TrainSuggestibility(TrainSuggestibilityArgs),
    /// Train the concept, agency and sociality classifiers.
    TrainFeatures(TrainFeaturesArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TaskKind {
    Her,
    Suggestibility,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the tasks that reached no agreement.
    #[arg(long)]
    pub excluded: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TaskKind::Her)]
    pub task: TaskKind,
    /// Also balance the entailment examples and write train/validation/test files here.
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
}

/// Model options shared by `train` and `hpo`; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// JSON file with any subset of the model hyperparameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub merge_hidden_dim: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Pretrained word vectors, one `word v1 v2 ...` line per word.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep the embedding table fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    /// Feature classifiers from `train-features`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub concept: bool,
    #[arg(long)]
    pub agency: bool,
    #[arg(long)]
    pub sociality: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss and validation AU-ROC as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub moment: String,
    /// Score this single suggestion instead of ranking the database.
    #[arg(long)]
    pub suggestion: Option<String>,
    /// Suggestion database; the curated set when omitted.
    #[arg(long)]
    pub suggestions: Option<PathBuf>,
    #[arg(long, default_value_t = service::DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct HpoArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long, default_value_t = happiness_core::eval::search::DEFAULT_TRIALS)]
    pub trials: usize,
    /// JSON search space; the built-in ranges when omitted.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// One JSON line per trial.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Classifier from `train-suggestibility`.
    #[arg(long)]
    pub model: PathBuf,
    /// Plain text with one moment per line, or JSONL objects with a `text` field.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Candidates as JSONL `{text, score}`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_DEDUPE_JACCARD)]
    pub dedupe: f64,
    /// Database to extend with the mined candidates; the curated set when omitted.
    #[arg(long)]
    pub suggestions: Option<PathBuf>,
    /// Write the extended database here.
    #[arg(long)]
    pub suggestions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainSuggestibilityArgs {
    /// JSONL of `{text, label}` examples.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "logreg")]
    pub kind: ClassifierKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainFeaturesArgs {
    /// JSONL `{text, concepts: [name, ...]}`.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// JSONL `{text, label: 0|1}`.
    #[arg(long)]
    pub agency: Option<PathBuf>,
    /// JSONL `{text, label: 0|1}`.
    #[arg(long)]
    pub sociality: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON logistic-regression parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = FEATURE_VOCAB_SIZE)]
    pub vocab_size: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Without a model the suggest endpoint answers 503.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub suggestions: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value = "feedback.jsonl")]
    pub feedback: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Aggregate(a) => aggregate(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Hpo(a) => hpo(a, seed),
        Command::FilterCorpus(a) => filter(a),
        Command::TrainSuggestibility(a) => train_suggestibility_cmd(a, seed),
        Command::TrainFeatures(a) => train_features(a),
        Command::Serve(a) => serve(a),
    }
}

fn print_json(value: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn aggregate(a: AggregateArgs, seed: Option<u64>) -> Result<()> {
    match a.task {
        TaskKind::Her => {
            let tasks = load_annotations(&a.input)?;
            let agg = aggregate_tasks(&tasks);
            save_examples(&a.out, &agg.examples)?;
            if let Some(p) = &a.excluded {
                save_annotations(p, &agg.excluded)?;
            }
            let positives = agg.examples.iter().filter(|e| e.label.is_positive()).count();
            let mut report = json!({
                "tasks": tasks.len(),
                "entailment": positives,
                "non_entailment": agg.examples.len() - positives,
                "excluded": agg.excluded.len(),
            });
            if let Some(dir) = &a.split_dir {
                let split = balance_and_split(agg.examples, SplitRatios::default(), seed.unwrap_or(0))?;
                fs::create_dir_all(dir)?;
                save_examples(&dir.join("train.jsonl"), &split.train)?;
                save_examples(&dir.join("validation.jsonl"), &split.validation)?;
                save_examples(&dir.join("test.jsonl"), &split.test)?;
                report["split"] = json!({
                    "train": split.train.len(),
                    "validation": split.validation.len(),
                    "test": split.test.len(),
                    "seed": split.seed,
                });
            }
            print_json(&report)
        }
        TaskKind::Suggestibility => {
            if a.split_dir.is_some() {
                bail!("--split-dir applies to entailment votes only");
            }
            let tasks: Vec<SuggestibilityTask> = read_jsonl(&a.input)?;
            let (examples, excluded) = aggregate_suggestibility_tasks(&tasks);
            write_jsonl(&a.out, &examples)?;
            if let Some(p) = &a.excluded {
                let rest: Vec<&SuggestibilityTask> = tasks
                    .iter()
                    .filter(|t| aggregate_suggestibility(&t.votes).label().is_none())
                    .collect();
                write_jsonl(p, &rest)?;
            }
            let positives = examples.iter().filter(|e| e.label.is_positive()).count();
            print_json(&json!({
                "tasks": tasks.len(),
                "suggestible": positives,
                "not_suggestible": examples.len() - positives,
                "excluded": excluded,
            }))
        }
    }
}

/// Defaults, then the config file, then individual flags, then `--seed`.
pub fn her_config(m: &ModelArgs, seed: Option<u64>) -> Result<HerConfig> {
    let mut c: HerConfig = read_config(m.config.as_deref())?;
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = m.$field {
                c.$field = v;
            }
        )*};
    }
    set!(epochs, learning_rate, dropout, batch_size, hidden_dim, num_layers, embed_dim, merge_hidden_dim, vocab_size);
    c.features.concept |= m.concept;
    c.features.agency |= m.agency;
    c.features.sociality |= m.sociality;
    if let Some(s) = seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}

/// Fresh model for `train`: vocabulary from the training pairs, optional
/// pretrained vectors and feature classifiers.
pub fn build_model(m: &ModelArgs, config: HerConfig, train: &[HerExample]) -> Result<HerModel> {
    let vocab = build_her_vocab(train, config.vocab_size)?;
    let features = m.features.as_deref().map(FeatureSuite::load).transpose()?;
    let embeddings = match &m.embeddings {
        Some(path) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(2);
            let (mut table, covered) = load_embeddings(path, &vocab, config.embed_dim, &mut rng)?;
            eprintln!("embeddings cover {covered} of {} vocabulary entries", vocab.len());
            table.trainable = !m.freeze_embeddings;
            Some(table)
        }
        None => None,
    };
    let mut model = HerModel::new(config, vocab, embeddings, features)?;
    if m.freeze_embeddings {
        model.embeddings.trainable = false;
    }
    Ok(model)
}

fn train(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let config = her_config(&a.model, seed)?;
    let train_set = load_examples(&a.train)?;
    let val_set = match &a.val {
        Some(p) => load_examples(p)?,
        None => Vec::new(),
    };
    let model = build_model(&a.model, config, &train_set)?;
    let (model, history) = train_her(model, &train_set, &val_set)?;
    fs::write(&a.out, checkpoint_bytes(&model)?).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.history {
        fs::write(p, serde_json::to_vec_pretty(&history)?)?;
    }
    print_json(&train_summary(&history))
}

fn train_summary(h: &TrainingHistory) -> Value {
    let last = h.epochs.last();
    json!({
        "epochs": h.epochs.len(),
        "final_train_loss": last.map(|e| e.train_loss),
        "best_epoch": h.best_epoch,
        "best_val_auroc": h.best_epoch.and_then(|b| h.epochs.iter().find(|e| e.epoch == b)).and_then(|e| e.val_auroc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub au_roc: f64,
    pub accuracy: f64,
    pub examples: usize,
}

pub fn evaluate(model: &HerModel, data: &[HerExample], threshold: f64) -> Result<EvalReport> {
    let scored = score_examples(model, data)?;
    Ok(EvalReport {
        au_roc: au_roc(&scored)?,
        accuracy: accuracy(&scored, threshold)?,
        examples: data.len(),
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&a.model)?;
    let data = load_examples(&a.data)?;
    let report = evaluate(&model, &data, a.threshold)?;
    print_json(&serde_json::to_value(report)?)
}

fn load_db(path: Option<&Path>) -> Result<SuggestionDb> {
    Ok(match path {
        Some(p) => SuggestionDb::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SuggestionDb::curated(),
    })
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_checkpoint(&a.model)?;
    if let Some(s) = &a.suggestion {
        let p = model.predict(&a.moment, s)?;
        return print_json(&json!({ "probability": p }));
    }
    let db = load_db(a.suggestions.as_deref())?;
    let req = SuggestRequest {
        moment: a.moment.clone(),
        k: Some(a.k),
    };
    let resp = service::suggest(Some(&model), &db, &req).map_err(|e| anyhow!(e))?;
    print_json(&serde_json::to_value(resp)?)
}

fn hpo(a: HpoArgs, seed: Option<u64>) -> Result<()> {
    let base = her_config(&a.model, seed)?;
    let space: SearchSpace = read_config(a.space.as_deref())?;
    let train_set = load_examples(&a.train)?;
    let val_set = load_examples(&a.val)?;
    let outcome = random_search(&space, a.trials, base.seed, |params, trial_seed| -> Result<f64> {
        let mut config = params.apply(&base);
        config.seed = trial_seed;
        config.validate()?;
        let model = build_model(&a.model, config, &train_set)?;
        let (_, history) = train_her(model, &train_set, &val_set)?;
        history
            .best_epoch
            .and_then(|b| history.epochs.iter().find(|e| e.epoch == b))
            .and_then(|e| e.val_auroc)
            .ok_or_else(|| anyhow!("validation set needs both classes"))
    })?;
    if let Some(p) = &a.log {
        write_trial_log(p, &outcome.trials)?;
    }
    print_json(&json!({
        "best": outcome.best,
        "config": outcome.best.config.apply(&HerConfig { seed: outcome.best.seed, ..base }),
    }))
}

/// One moment per non-blank line, or the `text` field of each JSONL record.
pub fn read_corpus(path: &Path) -> Result<Vec<String>> {
    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
    if is_jsonl {
        #[derive(Deserialize)]
        struct Line {
            text: String,
        }
        let lines: Vec<Line> = read_jsonl(path)?;
        return Ok(lines.into_iter().map(|l| l.text).collect());
    }
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn filter(a: FilterArgs) -> Result<()> {
    let model = SuggestibilityModel::load(&a.model)?;
    let corpus = read_corpus(&a.corpus)?;
    let kept = filter_corpus(&corpus, &model, a.threshold, a.dedupe)?;
    write_jsonl(&a.out, &kept)?;
    let mut report = json!({ "corpus": corpus.len(), "candidates": kept.len() });
    if let Some(out) = &a.suggestions_out {
        let mut db = load_db(a.suggestions.as_deref())?;
        report["added"] = json!(db.add_mined(&kept));
        report["database"] = json!(db.len());
        db.save(out)?;
    }
    print_json(&report)
}

fn train_suggestibility_cmd(a: TrainSuggestibilityArgs, seed: Option<u64>) -> Result<()> {
    let mut config: SuggestibilityConfig = read_config(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        config.epochs = e;
        config.logreg.epochs = e;
    }
    let examples: Vec<SuggestibilityExample> = read_jsonl(&a.data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let model = train_suggestibility(&examples, a.kind, &config, &mut rng)?;
    model.save(&a.out)?;
    print_json(&json!({ "kind": model.kind(), "examples": examples.len() }))
}

fn train_features(a: TrainFeaturesArgs) -> Result<()> {
    if a.concepts.is_none() && a.agency.is_none() && a.sociality.is_none() {
        bail!("give at least one of --concepts, --agency, --sociality");
    }
    let params: LogRegParams = read_config(a.config.as_deref())?;
    let concepts = a.concepts.as_deref().map(load_labeled_corpus).transpose()?;
    let agency = a.agency.as_deref().map(load_labeled_corpus).transpose()?;
    let sociality = a.sociality.as_deref().map(load_labeled_corpus).transpose()?;
    let texts: Vec<&str> = [&concepts, &agency, &sociality]
        .into_iter()
        .flatten()
        .flatten()
        .map(|l| l.text())
        .collect();
    let vocab = build_feature_vocab(&texts, a.vocab_size)?;
    let suite = FeatureSuite {
        concepts: concepts
            .map(|c| ConceptClassifier::train(&vocab, &concept_examples(&c)?, &params))
            .transpose()?,
        agency: agency
            .map(|c| train_binary_feature("agency", &vocab, &binary_examples(&c)?, &params))
            .transpose()?,
        sociality: sociality
            .map(|c| train_binary_feature("sociality", &vocab, &binary_examples(&c)?, &params))
            .transpose()?,
        vocab,
    };
    suite.save(&a.out)?;
    print_json(&json!({
        "vocab": suite.vocab.len(),
        "concepts": suite.concepts.is_some(),
        "agency": suite.agency.is_some(),
        "sociality": suite.sociality.is_some(),
    }))
}

fn serve(a: ServeArgs) -> Result<()> {
    let model = a.model.as_deref().map(load_checkpoint).transpose()?;
    let db = load_db(a.suggestions.as_deref())?;
    let feedback =
        FeedbackLog::open(&a.feedback).with_context(|| format!("opening {}", a.feedback.display()))?;
    let state = Arc::new(AppState { model, db, feedback });
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(a.host, a.port)).await?;
        service::serve(state, listener).await
    })?;
    Ok(())
}
