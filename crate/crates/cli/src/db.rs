//! File-backed suggestion database.

use std::collections::HashSet;
use std::path::Path;

use happiness_core::jsonl::{read_jsonl, write_jsonl};
use happiness_core::suggestibility::Candidate;
use serde::{Deserialize, Serialize};

const CURATED: &str = include_str!("../data/curated_suggestions.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Curated,
    Mined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("duplicate suggestion id {0:?}")]
    DuplicateId(String),
    #[error("suggestion {0:?} has empty text")]
    EmptyText(String),
    #[error("suggestion database is empty")]
    Empty,
    #[error(transparent)]
    Core(#[from] happiness_core::Error),
}

/// Ordered suggestions with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SuggestionDb {
    items: Vec<Suggestion>,
}

impl SuggestionDb {
    pub fn new(items: Vec<Suggestion>) -> Result<Self, DbError> {
        let mut seen = HashSet::new();
        for s in &items {
            if !seen.insert(s.id.as_str()) {
                return Err(DbError::DuplicateId(s.id.clone()));
            }
            if s.text.trim().is_empty() {
                return Err(DbError::EmptyText(s.id.clone()));
            }
        }
        Ok(SuggestionDb { items })
    }

    /// The 36 hand-written suggestions shipped with the crate.
    pub fn curated() -> Self {
        let items = CURATED
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).expect("bundled suggestion file is valid"))
            .collect();
        SuggestionDb::new(items).expect("bundled suggestion ids are unique")
    }

    pub fn load(path: &Path) -> Result<Self, DbError> {
        let db = SuggestionDb::new(read_jsonl(path)?)?;
        if db.items.is_empty() {
            return Err(DbError::Empty);
        }
        Ok(db)
    }

    pub fn save(&self, path: &Path) -> Result<(), DbError> {
        Ok(write_jsonl(path, &self.items)?)
    }

    pub fn items(&self) -> &[Suggestion] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Suggestion> {
        self.items.iter().find(|s| s.id == id)
    }

    pub fn texts(&self) -> Vec<&str> {
        self.items.iter().map(|s| s.text.as_str()).collect()
    }

    /// Appends mined candidates whose text is not already present, numbering
    /// them `m001`, `m002`, ... after the highest mined id so far. Returns how
    /// many were added.
    pub fn add_mined(&mut self, candidates: &[Candidate]) -> usize {
        let mut next = self
            .items
            .iter()
            .filter_map(|s| s.id.strip_prefix('m')?.parse::<usize>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        let mut texts: HashSet<String> = self.items.iter().map(|s| s.text.clone()).collect();
        let mut added = 0;
        for c in candidates {
            if !texts.insert(c.text.clone()) {
                continue;
            }
            let mut id = format!("m{next:03}");
            while self.get(&id).is_some() {
                next += 1;
                id = format!("m{next:03}");
            }
            self.items.push(Suggestion {
                id,
                text: c.text.clone(),
                source: Source::Mined,
                score: Some(c.score),
            });
            next += 1;
            added += 1;
        }
        added
    }
}
