use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{read_text, CorpusError, Vocabulary, PAD_INDEX};
use crate::numeric::Tensor;

/// Standard deviation of the random rows given to tokens without a
/// pretrained vector.
pub const FALLBACK_STD: f64 = 0.1;

/// `|vocabulary| × dim` word vectors; row 0 (padding) is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: Tensor,
    /// How many vocabulary rows came from the pretrained file.
    pub found: usize,
}

impl EmbeddingMatrix {
    pub fn from_tensor(matrix: Tensor) -> Self {
        EmbeddingMatrix { matrix, found: 0 }
    }

    /// Every row drawn from `N(0, FALLBACK_STD²)`, padding row zeroed.
    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, FALLBACK_STD).expect("valid std");
        let mut data: Vec<f64> = (0..vocab_size * dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        data[PAD_INDEX * dim..(PAD_INDEX + 1) * dim].fill(0.0);
        EmbeddingMatrix {
            matrix: Tensor::matrix(vocab_size, dim, data).expect("sized"),
            found: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.matrix
    }

    pub fn into_tensor(self) -> Tensor {
        self.matrix
    }
}

/// Loads GloVe-style text vectors for the tokens of `vocab`.
pub fn parse_pretrained_embeddings(
    content: &str,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, CorpusError> {
    let mut emb = EmbeddingMatrix::random(vocab.len(), dim, seed);
    let mut found = 0;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(CorpusError::Format {
                line: i + 1,
                message: format!(
                    "expected {dim} values for {token:?}, found {}",
                    values.len()
                ),
            });
        }
        let Some(row) = vocab.get(token) else {
            continue;
        };
        let dst = emb.matrix.row_mut(row);
        for (d, v) in dst.iter_mut().zip(&values) {
            *d = v.parse::<f64>().map_err(|e| CorpusError::Format {
                line: i + 1,
                message: format!("bad float {v:?}: {e}"),
            })?;
        }
        found += 1;
    }
    emb.matrix.row_mut(PAD_INDEX).fill(0.0);
    emb.found = found;
    Ok(emb)
}

pub fn load_pretrained_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, CorpusError> {
    parse_pretrained_embeddings(&read_text(path.as_ref())?, vocab, dim, seed)
}

/// Writes `token v1 … vD` lines.
pub fn write_embeddings_text<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut s = String::new();
    for (token, values) in rows {
        s.push_str(token);
        for v in values {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}
