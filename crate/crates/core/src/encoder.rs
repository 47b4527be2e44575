//! Bi-level news encoder.
//!
//! The first level runs `K` attention heads over the word vectors of a
//! document. Head `k` scores position `j` with `v_kᵀ tanh(Wᵀe_j + b_k)`,
//! normalizes the scores over the real positions, and pools the word
//! vectors into a topic vector `h_k`. The second level scores each topic
//! vector with an additive attention layer and pools them into the
//! document vector `d`.
//!
//! Topic vectors are convex combinations of word vectors, so they share the
//! embedding dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EmbeddingMatrix, TokenSequence};
use crate::numeric::{NumericError, Tape, Tensor, Var};

/// Parameters of the multi-head topic attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicAttentionParams {
    /// `D_E × D_K`, or `D_E × (K·D_K)` when every head owns its projection.
    pub projection: Tensor,
    /// `K × D_K`, one query vector per head.
    pub query: Tensor,
    /// `K × D_K`, one bias per head.
    pub bias: Tensor,
    pub per_head: bool,
}

impl TopicAttentionParams {
    pub fn heads(&self) -> usize {
        self.query.rows()
    }
}

/// Parameters of an additive attention pooling layer: `D_in × D_P`
/// projection, `D_P` bias and `D_P` query.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditivePoolParams {
    pub projection: Tensor,
    pub bias: Tensor,
    pub query: Tensor,
}

/// Everything one document produces inside the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct NewsEncoding {
    /// `K × N`: row `k` is head `k`'s distribution over token positions.
    pub topic_term_weights: Tensor,
    /// `K × D_H`
    pub topic_vectors: Tensor,
    /// `K`: distribution over topics for this document.
    pub doc_topic_weights: Vec<f64>,
    /// `D_H`
    pub doc_vector: Vec<f64>,
}

/// Tape handles for [`TopicAttentionParams`].
#[derive(Clone, Copy, Debug)]
pub struct TopicAttentionVars {
    pub projection: Var,
    pub query: Var,
    pub bias: Var,
    pub per_head: bool,
}

/// Tape handles for [`AdditivePoolParams`].
#[derive(Clone, Copy, Debug)]
pub struct AdditiveVars {
    pub projection: Var,
    pub bias: Var,
    pub query: Var,
}

/// Dropout behaviour for one forward pass.
pub enum Dropout<'a> {
    Off,
    On { rate: f64, rng: &'a mut ChaCha8Rng },
}

impl Dropout<'_> {
    pub(crate) fn apply(&mut self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Dropout::Off => x,
            Dropout::On { rate, rng } => tape.dropout(x, *rate, &mut **rng),
        }
    }

    pub(crate) fn reborrow(&mut self) -> Dropout<'_> {
        match self {
            Dropout::Off => Dropout::Off,
            Dropout::On { rate, rng } => Dropout::On { rate: *rate, rng },
        }
    }
}

/// Topic attention on the tape. `words` is `n × D_E`; returns `(A, H)` with
/// `A` of shape `K × n` and `H` of shape `K × D_E`.
pub fn topic_attention(
    tape: &mut Tape,
    words: Var,
    mask: &[bool],
    vars: &TopicAttentionVars,
) -> Result<(Var, Var), NumericError> {
    let proj = tape.matmul(words, vars.projection)?;
    let logits = tape.head_logits(proj, vars.bias, vars.query, vars.per_head)?;
    let weights = tape.masked_softmax(logits, mask)?;
    let topics = tape.matmul(weights, words)?;
    Ok((weights, topics))
}

/// Additive attention pooling on the tape. `rows` is `n × D`; returns the
/// `n` attention weights and the pooled `D` vector.
pub fn additive_attention(
    tape: &mut Tape,
    rows: Var,
    vars: &AdditiveVars,
) -> Result<(Var, Var), NumericError> {
    let proj = tape.matmul(rows, vars.projection)?;
    let shifted = tape.add_row(proj, vars.bias)?;
    let act = tape.tanh(shifted);
    let scores = tape.matvec(act, vars.query)?;
    let weights = tape.softmax(scores)?;
    let pooled = tape.vecmat(weights, rows)?;
    Ok((weights, pooled))
}

fn bind_topic(tape: &mut Tape, p: &TopicAttentionParams) -> TopicAttentionVars {
    TopicAttentionVars {
        projection: tape.input(p.projection.clone()),
        query: tape.input(p.query.clone()),
        bias: tape.input(p.bias.clone()),
        per_head: p.per_head,
    }
}

fn bind_pool(tape: &mut Tape, p: &AdditivePoolParams) -> AdditiveVars {
    AdditiveVars {
        projection: tape.input(p.projection.clone()),
        bias: tape.input(p.bias.clone()),
        query: tape.input(p.query.clone()),
    }
}

fn word_rows(tokens: &TokenSequence, embeddings: &EmbeddingMatrix) -> Result<Tensor, NumericError> {
    let dim = embeddings.dim();
    let mut data = Vec::with_capacity(tokens.max_len() * dim);
    for &i in &tokens.indices {
        if i >= embeddings.vocab_size() {
            return Err(NumericError::Index {
                op: "embedding lookup",
                index: i,
                len: embeddings.vocab_size(),
            });
        }
        data.extend_from_slice(embeddings.row(i));
    }
    Tensor::matrix(tokens.max_len(), dim, data)
}

/// Returns `(A, h)` for one document over all `N` positions of `tokens`.
pub fn topic_attention_forward(
    tokens: &TokenSequence,
    embeddings: &EmbeddingMatrix,
    params: &TopicAttentionParams,
) -> Result<(Tensor, Tensor), NumericError> {
    let mut tape = Tape::new();
    let words = tape.input(word_rows(tokens, embeddings)?);
    let vars = bind_topic(&mut tape, params);
    let (a, h) = topic_attention(&mut tape, words, &tokens.mask, &vars)?;
    Ok((tape.value(a).clone(), tape.value(h).clone()))
}

/// Returns `(B, d)` for a `K × D_H` matrix of topic vectors.
pub fn additive_pool_forward(
    topics: &Tensor,
    params: &AdditivePoolParams,
) -> Result<(Vec<f64>, Vec<f64>), NumericError> {
    let mut tape = Tape::new();
    let h = tape.input(topics.clone());
    let vars = bind_pool(&mut tape, params);
    let (b, d) = additive_attention(&mut tape, h, &vars)?;
    Ok((tape.value(b).data().to_vec(), tape.value(d).data().to_vec()))
}

/// Dropout settings for [`encode_news`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DropoutMode {
    Eval,
    Train { rate: f64, seed: u64 },
}

/// Full encoder forward. In training mode dropout hits the word vectors and
/// the topic vectors.
pub fn encode_news(
    tokens: &TokenSequence,
    embeddings: &EmbeddingMatrix,
    topic: &TopicAttentionParams,
    pool: &AdditivePoolParams,
    mode: DropoutMode,
) -> Result<NewsEncoding, NumericError> {
    let mut rng;
    let mut dropout = match mode {
        DropoutMode::Eval => Dropout::Off,
        DropoutMode::Train { rate, seed } => {
            rng = ChaCha8Rng::seed_from_u64(seed);
            Dropout::On {
                rate,
                rng: &mut rng,
            }
        }
    };
    let mut tape = Tape::new();
    let words = tape.input(word_rows(tokens, embeddings)?);
    let topic_vars = bind_topic(&mut tape, topic);
    let pool_vars = bind_pool(&mut tape, pool);
    let enc = encode_on_tape(
        &mut tape,
        words,
        &tokens.mask,
        &topic_vars,
        &pool_vars,
        &mut dropout,
    )?;
    Ok(enc.read(&tape, tokens.max_len()))
}

/// Tape handles of one encoded document.
#[derive(Clone, Copy, Debug)]
pub struct EncodedVars {
    pub topic_term_weights: Var,
    pub topic_vectors: Var,
    pub doc_topic_weights: Var,
    pub doc_vector: Var,
}

impl EncodedVars {
    /// Copies the values off the tape, padding `A` with zero columns up to
    /// `max_len` positions.
    pub fn read(&self, tape: &Tape, max_len: usize) -> NewsEncoding {
        let a = tape.value(self.topic_term_weights);
        let (k, n) = (a.rows(), a.cols());
        let mut padded = Tensor::zeros(&[k, max_len.max(n)]);
        for r in 0..k {
            padded.row_mut(r)[..n].copy_from_slice(a.row(r));
        }
        NewsEncoding {
            topic_term_weights: padded,
            topic_vectors: tape.value(self.topic_vectors).clone(),
            doc_topic_weights: tape.value(self.doc_topic_weights).data().to_vec(),
            doc_vector: tape.value(self.doc_vector).data().to_vec(),
        }
    }
}

/// Both encoder levels on the tape, starting from word vectors.
pub fn encode_on_tape(
    tape: &mut Tape,
    words: Var,
    mask: &[bool],
    topic: &TopicAttentionVars,
    pool: &AdditiveVars,
    dropout: &mut Dropout<'_>,
) -> Result<EncodedVars, NumericError> {
    let words = dropout.apply(tape, words);
    let (a, h) = topic_attention(tape, words, mask, topic)?;
    let h = dropout.apply(tape, h);
    let (b, d) = additive_attention(tape, h, pool)?;
    Ok(EncodedVars {
        topic_term_weights: a,
        topic_vectors: h,
        doc_topic_weights: b,
        doc_vector: d,
    })
}

/// Xavier-uniform matrix: entries in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::matrix(rows, cols, data).expect("sized")
}
