use happiness_core::eval::{random_search, SearchSpace, TrialStatus};
use happiness_core::Error;

/// Known objective: peaks at learning rate 1e-3 on a log scale.
fn objective(lr: f64) -> f64 {
    -(lr.log10() + 3.0).powi(2)
}

#[test]
fn nine_trials_return_argmax_of_own_log() {
    let space = SearchSpace::default();
    let out = random_search(&space, 9, 11, |hp, _| Ok::<_, String>(objective(hp.learning_rate.unwrap()))).unwrap();
    assert_eq!(out.trials.len(), 9);
    let recomputed = out
        .trials
        .iter()
        .map(|t| objective(t.config.learning_rate.unwrap()))
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best.val_auroc, Some(recomputed));
    let first_best = out.trials.iter().find(|t| t.val_auroc == Some(recomputed)).unwrap();
    assert_eq!(&out.best, first_best);
}

#[test]
fn same_seed_same_trials() {
    let space = SearchSpace::default();
    let run = |seed| random_search(&space, 9, seed, |hp, s| Ok::<_, String>(hp.dropout.unwrap() + (s % 7) as f64)).unwrap();
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).trials, run(4).trials);
}

#[test]
fn ties_go_to_earliest_trial() {
    let out = random_search(&SearchSpace::default(), 5, 0, |_, _| Ok::<_, String>(0.5)).unwrap();
    assert_eq!(out.best.trial, 0);
}

#[test]
fn failures_are_logged_and_skipped() {
    let mut calls = 0;
    let out = random_search(&SearchSpace::default(), 4, 2, |_, _| {
        calls += 1;
        if calls % 2 == 1 {
            Err("diverged".to_string())
        } else {
            Ok(calls as f64)
        }
    })
    .unwrap();
    assert_eq!(out.trials[0].status, TrialStatus::Failed);
    assert_eq!(out.trials[0].error.as_deref(), Some("diverged"));
    assert_eq!(out.best.trial, 3);

    let all_fail = random_search(&SearchSpace::default(), 3, 2, |_, _| Err::<f64, _>("no"));
    assert!(matches!(all_fail, Err(Error::AllTrialsFailed(3))));
}

#[test]
fn trial_log_is_jsonl() {
    let out = random_search(&SearchSpace::default(), 2, 1, |_, _| Ok::<_, String>(0.7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trials.jsonl");
    happiness_core::eval::search::write_trial_log(&p, &out.trials).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["trial", "config", "val_auroc", "status"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
    }
}
