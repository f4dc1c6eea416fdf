//! Dense user features from pretrained word vectors.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::scalar::Real;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One word per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn empty() -> Self {
        Self(HashSet::new())
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

fn strip_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"https?://\S+|www\.\S+|[@#][\p{L}\p{N}_]+").unwrap())
}

/// Lowercased word tokens with URLs, mentions, hashtags, punctuation and
/// stopwords removed. Text is NFC-normalized first.
pub fn preprocess_text(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let text: String = text.nfc().collect::<String>().to_lowercase();
    let stripped = strip_re().replace_all(&text, " ");
    let cleaned: String = stripped
        .chars()
        .filter(|&c| c != '\'' && c != '\u{2019}')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !stopwords.contains(w))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T = f64> {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<T>>,
    /// Tokens that appeared more than once; the last row won.
    pub duplicates: usize,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<T>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if self.vectors.insert(token.to_lowercase(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Reads the word2vec text format: a `<count> <dim>` header followed by
    /// `token v1 … v_dim` rows.
    pub fn read<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty vector file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let (Some(count), Some(dim), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(1, format!("header {header:?} is not `<count> <dim>`")));
        };
        let count: usize = count.parse().map_err(|_| parse_err(1, format!("bad count {count:?}")))?;
        let dim: usize = dim.parse().map_err(|_| parse_err(1, format!("bad dimension {dim:?}")))?;
        let mut table = Self::new(dim);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default();
            let values: Vec<T> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(T::of_f64)
                        .ok_or_else(|| parse_err(lineno, format!("bad value {f:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("token {token:?} has {} values, expected {dim}", values.len()),
                ));
            }
            table.insert(token, values)?;
        }
        if table.duplicates > 0 {
            log::warn!("{}: {} duplicate tokens, last occurrence kept", path.display(), table.duplicates);
        }
        if table.len() + table.duplicates != count {
            log::warn!("{}: header declares {count} rows, found {}", path.display(), table.len() + table.duplicates);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file), path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DocEmbedding<T = f64> {
    pub user_id: String,
    pub vector: Vec<T>,
    pub n_tokens_matched: usize,
}

/// Mean of the vectors of in-vocabulary tokens, with multiplicity.
/// `None` when no token is in the table.
pub fn embed_document<T: Real>(user_id: &str, tokens: &[String], table: &EmbeddingTable<T>) -> Option<DocEmbedding<T>> {
    let mut sum = vec![T::zero(); table.dim];
    let mut matched = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t)) {
        sum.iter_mut().zip(v).for_each(|(s, &x)| *s = *s + x);
        matched += 1;
    }
    if matched == 0 {
        return None;
    }
    let n = T::of_usize(matched);
    Some(DocEmbedding {
        user_id: user_id.to_owned(),
        vector: sum.into_iter().map(|s| s / n).collect(),
        n_tokens_matched: matched,
    })
}
