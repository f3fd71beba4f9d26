//! Generated corpora with known ground truth, for sanity checks, demos and
//! tests where the real annotated data is unavailable.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datasets::{HerExample, Label};
use crate::error::Result;
use crate::features::{build_feature_vocab, Concept, ConceptClassifier, FeatureSuite, LogRegParams, FEATURE_VOCAB_SIZE};
use crate::suggestibility::{SuggestibilityExample, SuggestibilityLabel};

/// Cue words that identify each concept in generated text.
pub fn concept_words(concept: Concept) -> &'static [&'static str] {
    match concept {
        Concept::Family => &["mom", "dad", "sister"],
        Concept::Food => &["pizza", "pasta", "sushi"],
        Concept::Entertainment => &["movie", "concert", "show"],
        Concept::Career => &["promotion", "boss", "office"],
        Concept::Shopping => &["mall", "store", "sale"],
        Concept::Romance => &["girlfriend", "boyfriend", "date"],
        Concept::Conversation => &["chat", "phone", "talk"],
        Concept::Exercise => &["gym", "yoga", "jog"],
        Concept::Education => &["exam", "class", "school"],
        Concept::Animals => &["dog", "cat", "puppy"],
        Concept::Technology => &["laptop", "computer", "app"],
        Concept::Weather => &["sunshine", "rain", "snow"],
        Concept::Party => &["party", "birthday", "celebration"],
        Concept::Vacation => &["beach", "trip", "vacation"],
        Concept::Religion => &["church", "prayer", "temple"],
    }
}

const MOMENT_OPENERS: &[&str] = &["i enjoyed the", "i loved the", "there was a", "we had a great"];
const SUGGESTION_OPENERS: &[&str] = &["try the", "plan a", "make time for the", "think about the"];
const TAILS: &[&str] = &["today", "yesterday", "this weekend", "last night", "again", "at last"];

fn pick<'a, R: Rng + ?Sized>(items: &[&'a str], rng: &mut R) -> &'a str {
    items.choose(rng).copied().expect("non-empty word list")
}

fn moment_text<R: Rng + ?Sized>(word: &str, extra: Option<&str>, rng: &mut R) -> String {
    let mut t = format!("{} {word} {}", pick(MOMENT_OPENERS, rng), pick(TAILS, rng));
    if let Some(e) = extra {
        t.push(' ');
        t.push_str(e);
    }
    t
}

fn suggestion_text<R: Rng + ?Sized>(word: &str, extra: Option<&str>, rng: &mut R) -> String {
    let mut t = format!("{} {word}", pick(SUGGESTION_OPENERS, rng));
    if let Some(e) = extra {
        t.push(' ');
        t.push_str(e);
    }
    t
}

fn label(positive: bool) -> Label {
    if positive {
        Label::Entailment
    } else {
        Label::NonEntailment
    }
}

/// Single-concept sentences, `per_concept` for each of the fifteen concepts,
/// in moment and suggestion phrasing alike.
pub fn concept_corpus<R: Rng + ?Sized>(per_concept: usize, rng: &mut R) -> Vec<(String, Vec<Concept>)> {
    let mut out = Vec::with_capacity(per_concept * Concept::COUNT);
    for c in Concept::ALL {
        for i in 0..per_concept {
            let word = pick(concept_words(c), rng);
            let text = if i % 2 == 0 {
                moment_text(word, None, rng)
            } else {
                suggestion_text(word, None, rng)
            };
            out.push((text, vec![c]));
        }
    }
    out
}

/// Feature suite holding only concept classifiers trained on
/// [`concept_corpus`] long enough to separate every cue word.
pub fn concept_feature_suite<R: Rng + ?Sized>(per_concept: usize, rng: &mut R) -> Result<FeatureSuite> {
    let corpus = concept_corpus(per_concept, rng);
    let texts: Vec<&str> = corpus.iter().map(|(t, _)| t.as_str()).collect();
    let vocab = build_feature_vocab(&texts, FEATURE_VOCAB_SIZE)?;
    let params = LogRegParams {
        epochs: 1500,
        learning_rate: 2.0,
        ..LogRegParams::default()
    };
    let concepts = ConceptClassifier::train(&vocab, &corpus, &params)?;
    Ok(FeatureSuite {
        vocab,
        concepts: Some(concepts),
        agency: None,
        sociality: None,
    })
}

/// Pairs labeled entailment exactly when the moment and the suggestion end
/// with the same marker token; the concept words are random.
pub fn marker_task<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<HerExample> {
    const MARKERS: [&str; 2] = ["red", "blue"];
    let all: Vec<&str> = Concept::ALL.iter().flat_map(|&c| concept_words(c).iter().copied()).collect();
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let m = rng.gen_range(0..2);
            let s = if positive { m } else { 1 - m };
            HerExample {
                moment: moment_text(pick(&all, rng), Some(MARKERS[m]), rng),
                suggestion: suggestion_text(pick(&all, rng), Some(MARKERS[s]), rng),
                label: label(positive),
            }
        })
        .collect()
}

/// One concept per side; entailment exactly when both sides share it.
/// Classes alternate, so `n` even gives a balanced set.
pub fn concept_overlap_task<R: Rng + ?Sized>(n: usize, concepts: &[Concept], rng: &mut R) -> Vec<HerExample> {
    assert!(concepts.len() >= 2, "need at least two concepts");
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let a = *concepts.choose(rng).unwrap();
            let b = if positive {
                a
            } else {
                loop {
                    let b = *concepts.choose(rng).unwrap();
                    if b != a {
                        break b;
                    }
                }
            };
            HerExample {
                moment: moment_text(pick(concept_words(a), rng), None, rng),
                suggestion: suggestion_text(pick(concept_words(b), rng), None, rng),
                label: label(positive),
            }
        })
        .collect()
}

/// Entailment decided by a shared cue token (`sunny` or `quiet`) that
/// carries no concept, while concept words are drawn independently of the
/// label. Examples come in twins that differ only in the suggestion cue, so
/// anything that looks at concepts alone scores both twins the same.
pub fn lexical_cue_task<R: Rng + ?Sized>(twins: usize, rng: &mut R) -> Vec<HerExample> {
    const CUES: [&str; 2] = ["sunny", "quiet"];
    let all: Vec<&str> = Concept::ALL.iter().flat_map(|&c| concept_words(c).iter().copied()).collect();
    let mut out = Vec::with_capacity(2 * twins);
    for _ in 0..twins {
        let cue = rng.gen_range(0..2);
        let moment = moment_text(pick(&all, rng), Some(CUES[cue]), rng);
        let word = pick(&all, rng);
        let opener = pick(SUGGESTION_OPENERS, rng);
        for (s, positive) in [(cue, true), (1 - cue, false)] {
            out.push(HerExample {
                moment: moment.clone(),
                suggestion: format!("{opener} {word} {}", CUES[s]),
                label: label(positive),
            });
        }
    }
    out
}

const SUGGESTIBLE_TEMPLATES: &[&str] = &[
    "i went for a walk",
    "i took a long bath",
    "i enjoyed a quiet walk",
    "i had a warm bath",
];
const UNSUGGESTIBLE_TEMPLATES: &[&str] = &["i bought a new", "i won a", "i finally bought a", "i won the"];
const OBJECTS: &[&str] = &["phone", "car", "prize", "jacket", "ticket", "bike"];
const SUGGESTIBILITY_TAILS: &[&str] = &["today", "this morning", "after dinner", "in the park", "with my friend", "at last"];

/// Single-activity moments: walks and baths are suggestible, buying and
/// winning are not. Classes alternate.
pub fn suggestibility_task<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<SuggestibilityExample> {
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let text = if positive {
                format!("{} {}", pick(SUGGESTIBLE_TEMPLATES, rng), pick(SUGGESTIBILITY_TAILS, rng))
            } else {
                format!(
                    "{} {} {}",
                    pick(UNSUGGESTIBLE_TEMPLATES, rng),
                    pick(OBJECTS, rng),
                    pick(SUGGESTIBILITY_TAILS, rng)
                )
            };
            SuggestibilityExample {
                text,
                label: if positive {
                    SuggestibilityLabel::Suggestible
                } else {
                    SuggestibilityLabel::NotSuggestible
                },
            }
        })
        .collect()
}
