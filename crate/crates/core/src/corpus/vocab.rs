use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{read_text, CorpusError};

pub const PAD_INDEX: usize = 0;
pub const OOV_INDEX: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<unk>";

/// Token ↔ index map. Index 0 is padding, index 1 is out-of-vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from token streams. Tokens seen at least
    /// `min_freq` times are kept, ordered by descending count then
    /// lexicographically.
    pub fn build<'a, I>(docs: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for t in doc {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq.max(1) && *t != PAD_TOKEN && *t != OOV_TOKEN)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(entries.into_iter().map(|(t, _)| t.to_string()))
    }

    /// Vocabulary over the given non-reserved tokens, in order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()],
            index: HashMap::new(),
        };
        for t in tokens {
            if !v.index.contains_key(&t) && t != PAD_TOKEN && t != OOV_TOKEN {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Index of a token, `OOV_INDEX` if absent.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn is_reserved(index: usize) -> bool {
        index == PAD_INDEX || index == OOV_INDEX
    }

    /// Non-reserved indices.
    pub fn word_indices(&self) -> std::ops::Range<usize> {
        2..self.tokens.len()
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// One token per line, reserved tokens first.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(content: &str) -> Result<Self, CorpusError> {
        let lines: Vec<&str> = content.lines().collect();
        if lines.len() < 2 || lines[0] != PAD_TOKEN || lines[1] != OOV_TOKEN {
            return Err(CorpusError::Format {
                line: 1,
                message: format!("vocabulary must start with {PAD_TOKEN} and {OOV_TOKEN}"),
            });
        }
        Ok(Self::from_tokens(lines[2..].iter().map(|s| s.to_string())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::from_text(&read_text(path.as_ref())?)
    }
}
