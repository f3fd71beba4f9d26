//! Tokenization, vocabularies and pretrained word vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, Parameter};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Default neural vocabulary cap.
pub const DEFAULT_VOCAB_SIZE: usize = 1643;
pub const DEFAULT_EMBED_DIM: usize = 300;

/// Lowercases, splits on whitespace and emits every non-alphanumeric
/// character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lowered.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token ↔ index map with `PAD` at 0 and `UNK` at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Ranks tokens by descending frequency, then lexicographically, and
    /// keeps the first `max_size - 2` after the reserved entries.
    pub fn build<I, D, S>(corpus: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 2 {
            return Err(Error::Config(format!("vocabulary cap {max_size} leaves no room for PAD/UNK")));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            for tok in doc {
                let tok = tok.as_ref();
                if tok == PAD || tok == UNK {
                    continue;
                }
                *counts.entry(tok.to_string()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD.to_string(), UNK.to_string()];
        tokens.extend(ranked.into_iter().take(max_size - 2).map(|(t, _)| t));
        Vocab::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its index-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_INDEX] != PAD || tokens[UNK_INDEX] != UNK {
            return Err(Error::Config("vocabulary must start with PAD and UNK".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or `UNK_INDEX`.
    pub fn index_of(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Indices for `tokens`; an empty list becomes `[PAD_INDEX]`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        if tokens.is_empty() {
            return vec![PAD_INDEX];
        }
        tokens.iter().map(|t| self.index_of(t.as_ref())).collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// One vector per vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub table: Parameter,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// PAD row zero, every other row uniform(-0.1, 0.1).
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let mut m = Matrix::zeros(vocab_size, dim);
        for r in 0..vocab_size {
            for c in 0..dim {
                let v = rng.gen_range(-0.1..0.1);
                if r != PAD_INDEX {
                    m.set(r, c, v);
                }
            }
        }
        EmbeddingTable {
            dim,
            table: Parameter::new("embedding", m),
            trainable: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.table.value.rows()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.table.value.row(index)
    }

    pub fn lookup(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        ids.iter().map(|&i| self.row(i).to_vec()).collect()
    }

    /// Adds `d_rows[t]` into the gradient row of `ids[t]`.
    pub fn accumulate_grad(&mut self, ids: &[usize], d_rows: &[Vec<f64>]) {
        if !self.trainable {
            return;
        }
        for (&i, d) in ids.iter().zip(d_rows) {
            crate::nn::axpy(1.0, d, self.table.grad.row_mut(i));
        }
    }
}

/// Reads whitespace-separated `word f1 .. f_dim` lines. Vocabulary words
/// found in the file take the file vector, PAD is zero, everything else is
/// drawn from uniform(-0.1, 0.1). Returns the table and how many vocabulary
/// words the file covered.
pub fn load_embeddings<R: Rng + ?Sized>(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    rng: &mut R,
) -> Result<(EmbeddingTable, usize)> {
    let mut table = EmbeddingTable::random(vocab.len(), dim, rng);
    let reader = BufReader::new(File::open(path)?);
    let mut covered = vec![false; vocab.len()];
    let mut file_dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, idx + 1, format!("bad float: {e}")))?;
        match file_dim {
            None => {
                if values.len() != dim {
                    return Err(Error::Config(format!(
                        "embedding file has {}-dimensional vectors, expected {dim}",
                        values.len()
                    )));
                }
                file_dim = Some(values.len());
            }
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected {d} values after the word, found {}", values.len()),
                ));
            }
            Some(_) => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, idx + 1, "non-finite value"));
        }
        if let Some(i) = vocab.get(word) {
            if i != PAD_INDEX && i != UNK_INDEX {
                table.table.value.row_mut(i).copy_from_slice(&values);
                covered[i] = true;
            }
        }
    }
    let coverage = covered.iter().filter(|&&c| c).count();
    Ok((table, coverage))
}

/// Token vectors for `tokens`; unknown words map to the UNK row and an
/// empty list to a single PAD row.
pub fn embed<S: AsRef<str>>(tokens: &[S], vocab: &Vocab, table: &EmbeddingTable) -> Vec<Vec<f64>> {
    table.lookup(&vocab.encode(tokens))
}
