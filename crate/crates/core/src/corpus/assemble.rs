use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{tokenize, CorpusError, NewsArticle, Vocabulary, PAD_INDEX};

/// Fixed-length model input: token indices and a prefix mask of real tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub indices: Vec<usize>,
    pub mask: Vec<bool>,
}

impl TokenSequence {
    /// Builds a sequence of length `max_len` from real token indices,
    /// truncating or padding as needed.
    pub fn from_real(real: &[usize], max_len: usize) -> Self {
        let n = real.len().min(max_len);
        let mut indices = real[..n].to_vec();
        indices.resize(max_len, PAD_INDEX);
        let mut mask = vec![true; n];
        mask.resize(max_len, false);
        TokenSequence { indices, mask }
    }

    pub fn max_len(&self) -> usize {
        self.indices.len()
    }

    /// Number of real tokens; the mask is always a prefix.
    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    pub fn real_indices(&self) -> &[usize] {
        &self.indices[..self.real_len()]
    }

    /// Appends `extra` padding positions.
    pub fn padded(&self, extra: usize) -> Self {
        let mut s = self.clone();
        s.indices.extend(std::iter::repeat_n(PAD_INDEX, extra));
        s.mask.extend(std::iter::repeat_n(false, extra));
        s
    }
}

/// Title/body length budget for a document.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DocumentLayout {
    pub title_len: usize,
    pub body_len: usize,
}

impl DocumentLayout {
    pub fn max_len(&self) -> usize {
        self.title_len + self.body_len
    }
}

impl Default for DocumentLayout {
    fn default() -> Self {
        DocumentLayout {
            title_len: 30,
            body_len: 70,
        }
    }
}

/// The words that occupy the real positions of an assembled document:
/// truncated title tokens followed by truncated body tokens (the abstract
/// stands in for an empty body).
pub fn document_words(article: &NewsArticle, layout: DocumentLayout) -> Vec<String> {
    let mut words = tokenize(&article.title);
    words.truncate(layout.title_len);
    let body_source = if article.body.trim().is_empty() {
        &article.abstract_text
    } else {
        &article.body
    };
    let mut body = tokenize(body_source);
    body.truncate(layout.body_len);
    words.extend(body);
    words
}

pub fn assemble_document(
    article: &NewsArticle,
    vocab: &Vocabulary,
    layout: DocumentLayout,
) -> Result<TokenSequence, CorpusError> {
    let words = document_words(article, layout);
    if words.is_empty() {
        return Err(CorpusError::EmptyDocument(article.news_id.clone()));
    }
    let real: Vec<usize> = words.iter().map(|w| vocab.lookup(w)).collect();
    Ok(TokenSequence::from_real(&real, layout.max_len()))
}

/// Keeps at most `limit` history items, sampled uniformly without
/// replacement and kept in their original order.
pub fn sample_history<T: Clone>(history: &[T], limit: usize, seed: u64) -> Vec<T> {
    if history.len() <= limit {
        return history.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, history.len(), limit).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| history[i].clone()).collect()
}
