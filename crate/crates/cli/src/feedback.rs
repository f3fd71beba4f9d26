//! Append-only feedback log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accepted,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub record_id: String,
    pub timestamp: String,
    pub moment: String,
    pub suggestion_id: String,
    pub action: Action,
}

struct Writer {
    file: File,
    next: u64,
}

/// Serializes appends through one lock so records never interleave and ids
/// follow file order.
pub struct FeedbackLog {
    path: PathBuf,
    writer: Mutex<Writer>,
}

impl FeedbackLog {
    /// Opens `path` for appending, creating it if needed. Numbering resumes
    /// after the records already present.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let existing = match File::open(path) {
            Ok(f) => BufReader::new(f)
                .lines()
                .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                .count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FeedbackLog {
            path: path.to_path_buf(),
            writer: Mutex::new(Writer {
                file,
                next: existing + 1,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, moment: &str, suggestion_id: &str, action: Action) -> std::io::Result<FeedbackRecord> {
        self.append_at(Utc::now(), moment, suggestion_id, action)
    }

    pub fn append_at(
        &self,
        at: DateTime<Utc>,
        moment: &str,
        suggestion_id: &str,
        action: Action,
    ) -> std::io::Result<FeedbackRecord> {
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let record = FeedbackRecord {
            record_id: format!("f{:06}", w.next),
            timestamp: at.to_rfc3339_opts(SecondsFormat::Millis, true),
            moment: moment.to_string(),
            suggestion_id: suggestion_id.to_string(),
            action,
        };
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        w.file.write_all(&line)?;
        w.file.flush()?;
        w.next += 1;
        Ok(record)
    }

    pub fn read_all(&self) -> happiness_core::Result<Vec<FeedbackRecord>> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        happiness_core::jsonl::read_jsonl(&self.path)
    }
}
