mod support;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use happiness_cli::db::{Source, SuggestionDb};
use happiness_core::datasets::{load_examples, save_annotations, AnnotationTask};
use happiness_core::eval::Trial;
use happiness_core::jsonl::{read_jsonl, write_jsonl};
use happiness_core::suggestibility::{Candidate, SuggestibilityExample, SuggestibilityTask, SuggestibilityVotes};
use happiness_core::synthetic::suggestibility_task;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use support::{write_marker_data, HAIRCUT, TINY_CONFIG_JSON};

fn happiness(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_happiness")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = happiness(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, TINY_CONFIG_JSON).unwrap();
    path
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = happiness(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn errors_exit_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = happiness(&["aggregate", "--in", p(&missing), "--out", p(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn aggregate_applies_vote_rules() {
    let dir = tempfile::tempdir().unwrap();
    let task = |m: &str, v: [bool; 5]| AnnotationTask {
        moment: m.into(),
        suggestion: "s".into(),
        votes: v,
        rationales: None,
    };
    let (t, f) = (true, false);
    let tasks = vec![
        task("a", [t, t, t, t, t]),
        task("b", [t, t, t, t, f]),
        task("c", [f, f, f, f, f]),
        task("d", [t, t, f, f, f]),
        task("e", [t, f, f, f, f]),
    ];
    let input = dir.path().join("votes.jsonl");
    save_annotations(&input, &tasks).unwrap();
    let out = dir.path().join("examples.jsonl");
    let excluded = dir.path().join("excluded.jsonl");
    let report = ok_json(&["aggregate", "--in", p(&input), "--out", p(&out), "--excluded", p(&excluded)]);
    assert_eq!(report["entailment"], 2);
    assert_eq!(report["non_entailment"], 1);
    assert_eq!(report["excluded"], 2);
    let kept: Vec<String> = load_examples(&out).unwrap().into_iter().map(|e| e.moment).collect();
    assert_eq!(kept, ["a", "b", "c"]);
    let dropped: Vec<AnnotationTask> = read_jsonl(&excluded).unwrap();
    assert_eq!(dropped, tasks[3..]);
}

#[test]
fn aggregate_can_split() {
    let dir = tempfile::tempdir().unwrap();
    let tasks: Vec<AnnotationTask> = (0..50)
        .map(|i| AnnotationTask {
            moment: format!("moment {i}"),
            suggestion: "s".into(),
            votes: [i % 3 != 0; 5],
            rationales: None,
        })
        .collect();
    let input = dir.path().join("votes.jsonl");
    save_annotations(&input, &tasks).unwrap();
    let split = dir.path().join("split");
    let examples = dir.path().join("ex.jsonl");
    let args = [
        "aggregate", "--in", p(&input), "--out", p(&examples), "--split-dir", p(&split), "--seed", "4",
    ];
    let report = ok_json(&args);
    let sizes: Vec<usize> = ["train", "validation", "test"]
        .iter()
        .map(|n| load_examples(&split.join(format!("{n}.jsonl"))).unwrap().len())
        .collect();
    assert_eq!(sizes.iter().sum::<usize>(), 34);
    assert_eq!(report["split"]["train"], sizes[0]);
    let again = ok_json(&args);
    assert_eq!(report, again);
}

#[test]
fn aggregate_suggestibility_votes() {
    let dir = tempfile::tempdir().unwrap();
    let task = |text: &str, r: [bool; 5], s: [bool; 5]| SuggestibilityTask {
        text: text.into(),
        votes: SuggestibilityVotes {
            repeatable: r,
            sustainable: s,
        },
    };
    let input = dir.path().join("votes.jsonl");
    write_jsonl(
        &input,
        &[
            task("yes", [true; 5], [true, true, true, true, false]),
            task("no", [false; 5], [true; 5]),
            task("unsure", [true, true, false, false, false], [true; 5]),
        ],
    )
    .unwrap();
    let out = dir.path().join("ex.jsonl");
    let report = ok_json(&["aggregate", "--task", "suggestibility", "--in", p(&input), "--out", p(&out)]);
    assert_eq!(report["excluded"], 1);
    let ex: Vec<SuggestibilityExample> = read_jsonl(&out).unwrap();
    assert_eq!(ex.len(), 2);
    assert!(ex[0].label.is_positive() && !ex[1].label.is_positive());
}

#[test]
fn train_is_byte_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (train, val) = write_marker_data(dir.path(), 1);
    let config = write_config(dir.path());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok_json(&[
            "train", "--train", p(&train), "--val", p(&val), "--config", p(&config), "--out", p(&out), "--seed", seed,
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run("a.bin", "7");
    assert_eq!(a, run("b.bin", "7"));
    assert_ne!(a, run("c.bin", "8"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_marker_data(dir.path(), 2);
    let config = write_config(dir.path());
    let out = dir.path().join("m.bin");
    let history = dir.path().join("h.json");
    let args = [
        "train", "--train", p(&train), "--config", p(&config), "--epochs", "2", "--hidden-dim", "5", "--out", p(&out),
        "--history", p(&history),
    ];
    let report = ok_json(&args);
    assert_eq!(report["epochs"], 2);
    let model = happiness_core::her::load_checkpoint(&out).unwrap();
    assert_eq!(model.config.hidden_dim, 5);
    assert_eq!(model.config.embed_dim, 8);
    assert_eq!(model.config.seed, 0);
}

#[test]
fn eval_and_predict_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let (train, val) = write_marker_data(dir.path(), 3);
    let config = write_config(dir.path());
    let model = dir.path().join("m.bin");
    ok_json(&["train", "--train", p(&train), "--config", p(&config), "--out", p(&model)]);

    let report = ok_json(&["eval", "--model", p(&model), "--data", p(&val)]);
    let auc = report["au_roc"].as_f64().unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc) && (0.0..=1.0).contains(&acc));
    assert_eq!(report["examples"], 20);

    let single = ok_json(&["predict", "--model", p(&model), "--moment", "i loved the pizza red", "--suggestion", "try the gym red"]);
    let prob = single["probability"].as_f64().unwrap();
    assert!(prob > 0.0 && prob < 1.0);

    let ranked = ok_json(&["predict", "--model", p(&model), "--moment", HAIRCUT, "--k", "36"]);
    let cards = ranked["suggestions"].as_array().unwrap();
    assert_eq!(cards.len(), 36);
    assert!(cards.iter().any(|c| c["text"] == "Paint your nails"));
}

#[test]
fn hpo_log_matches_reported_best() {
    let dir = tempfile::tempdir().unwrap();
    let (train, val) = write_marker_data(dir.path(), 4);
    let config = write_config(dir.path());
    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"learning_rate": [0.001, 0.05], "dropout": [0.0, 0.3]}"#).unwrap();
    let log = dir.path().join("trials.jsonl");
    let args = [
        "hpo", "--train", p(&train), "--val", p(&val), "--config", p(&config), "--space", p(&space), "--trials", "3",
        "--log", p(&log), "--epochs", "2", "--seed", "11",
    ];
    let report = ok_json(&args);
    let trials: Vec<Trial> = read_jsonl(&log).unwrap();
    assert_eq!(trials.len(), 3);
    let best = trials
        .iter()
        .filter_map(|t| t.val_auroc.map(|v| (t.trial, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, b)) if b >= v => acc,
            _ => Some((i, v)),
        })
        .unwrap();
    assert_eq!(report["best"]["trial"], best.0);
    let log_bytes = std::fs::read(&log).unwrap();
    assert_eq!(ok_json(&args), report);
    assert_eq!(std::fs::read(&log).unwrap(), log_bytes);
}

#[test]
fn features_then_feature_aware_training() {
    let dir = tempfile::tempdir().unwrap();
    let concepts = dir.path().join("concepts.jsonl");
    let social = dir.path().join("social.jsonl");
    std::fs::write(&social, "{\"text\": \"with my friends\", \"label\": 1}\n{\"text\": \"alone at home\", \"label\": 0}\n").unwrap();
    let suite = dir.path().join("suite.json");
    let suite2 = dir.path().join("suite2.json");
    // every concept must see both classes, so cover all fifteen
    let all: Vec<String> = happiness_core::features::Concept::ALL
        .iter()
        .map(|c| format!("{{\"text\": \"about {}\", \"concepts\": [\"{}\"]}}\n", c.name().to_lowercase(), c.name()))
        .collect();
    std::fs::write(&concepts, all.concat()).unwrap();
    let args = |out: &Path| {
        vec![
            "train-features".to_string(), "--concepts".into(), p(&concepts).into(), "--sociality".into(),
            p(&social).into(), "--out".into(), p(out).into(),
        ]
    };
    let report = ok_json(&args(&suite).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(report["concepts"], true);
    assert_eq!(report["agency"], false);
    ok_json(&args(&suite2).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(std::fs::read(&suite).unwrap(), std::fs::read(&suite2).unwrap());

    let (train, _) = write_marker_data(dir.path(), 5);
    let config = write_config(dir.path());
    let model = dir.path().join("m.bin");
    let base = [
        "train", "--train", p(&train), "--config", p(&config), "--features", p(&suite), "--concept", "--sociality",
        "--out", p(&model),
    ];
    ok_json(&base);
    let loaded = happiness_core::her::load_checkpoint(&model).unwrap();
    assert!(loaded.config.features.concept && loaded.config.features.sociality);
    assert!(loaded.features.is_some());

    let out = happiness(&["train", "--train", p(&train), "--config", p(&config), "--agency", "--features", p(&suite), "--out", p(&model)]);
    assert!(!out.status.success(), "agency flag without an agency classifier must fail");
}

#[test]
fn suggestibility_training_and_corpus_filtering() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = dir.path().join("sugg.jsonl");
    write_jsonl(&data, &suggestibility_task(60, &mut rng)).unwrap();
    let model = dir.path().join("sugg.json");
    let model2 = dir.path().join("sugg2.json");
    for m in [&model, &model2] {
        ok_json(&["train-suggestibility", "--data", p(&data), "--out", p(m), "--seed", "3"]);
    }
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&model2).unwrap());

    let corpus = dir.path().join("corpus.txt");
    std::fs::write(
        &corpus,
        "i went for a walk in the park\ni went for a walk in the park today\ni won a prize today\ni went for a walk and bought a car\n",
    )
    .unwrap();
    let cands = dir.path().join("cands.jsonl");
    let db_out = dir.path().join("db.jsonl");
    let report = ok_json(&[
        "filter-corpus", "--model", p(&model), "--corpus", p(&corpus), "--out", p(&cands), "--suggestions-out", p(&db_out),
    ]);
    let kept: Vec<Candidate> = read_jsonl(&cands).unwrap();
    assert_eq!(kept.len(), 1, "{kept:?}");
    assert!(kept[0].text.starts_with("i went for a walk in the park"));
    assert_eq!(report["added"], 1);

    let db = SuggestionDb::load(&db_out).unwrap();
    assert_eq!(db.len(), 37);
    let mined = db.get("m001").unwrap();
    assert_eq!(mined.source, Source::Mined);
    assert_eq!(mined.text, kept[0].text);
}

#[test]
fn suggestion_db_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    let mut db = SuggestionDb::curated();
    db.add_mined(&[Candidate {
        text: "Fly a kite".into(),
        score: 0.812_345_678_901_234_5,
    }]);
    db.save(&path).unwrap();
    let back = SuggestionDb::load(&path).unwrap();
    assert_eq!(back, db);
    let path2 = dir.path().join("db2.jsonl");
    back.save(&path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    let shipped = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/curated_suggestions.jsonl")).unwrap();
    let lines: Vec<Value> = shipped.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(serde_json::to_value(SuggestionDb::curated()).unwrap(), Value::Array(lines));
}

#[test]
fn duplicate_ids_in_a_db_file_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"x\",\"text\":\"a\",\"source\":\"curated\"}\n{\"id\":\"x\",\"text\":\"b\",\"source\":\"mined\"}\n",
    )
    .unwrap();
    assert!(SuggestionDb::load(&path).is_err());
    let out = happiness(&["serve", "--suggestions", p(&path), "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

fn http(addr: &str, request: &str) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status: u16 = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw.split("\r\n\r\n").nth(1).unwrap();
    (status, serde_json::from_str(body).unwrap())
}

fn post(addr: &str, path: &str, body: &str) -> (u16, Value) {
    http(
        addr,
        &format!(
            "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    )
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_marker_data(dir.path(), 9);
    let config = write_config(dir.path());
    let model = dir.path().join("m.bin");
    ok_json(&["train", "--train", p(&train), "--config", p(&config), "--out", p(&model), "--epochs", "1"]);
    let feedback = dir.path().join("fb.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_happiness"))
        .args(["serve", "--model", p(&model), "--port", "0", "--feedback", p(&feedback)])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().to_string();

    let (status, v) = post(&addr, "/api/suggest", &format!("{{\"moment\": \"{HAIRCUT}\", \"k\": 2}}"));
    assert_eq!(status, 200);
    let cards = v["suggestions"].as_array().unwrap();
    assert_eq!(cards.len(), 2);
    let id = cards[0]["id"].as_str().unwrap().to_string();
    let (status, ack) = post(
        &addr,
        "/api/feedback",
        &format!("{{\"moment\": \"m\", \"suggestion_id\": \"{id}\", \"action\": \"accepted\"}}"),
    );
    assert_eq!(status, 200);
    let (status, all) = http(&addr, "GET /api/suggestions HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 200);
    assert_eq!(all.as_array().unwrap().len(), 36);
    child.kill().unwrap();
    child.wait().unwrap();

    let log: Vec<Value> = read_jsonl(&feedback).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0]["record_id"], ack["record_id"]);
    assert_eq!(log[0]["suggestion_id"], id.as_str());
}
