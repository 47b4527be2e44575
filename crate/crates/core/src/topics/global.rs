use std::collections::BTreeSet;

use super::TopicError;
use crate::corpus::Vocabulary;
use crate::encoder::TopicAttentionParams;
use crate::numeric::{Tape, Tensor};

/// `K × V` topic-word weights. Each row is a softmax over the allowed
/// tokens and zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalTopicDistribution {
    pub weights: Tensor,
    /// Allowed token indices, ascending.
    pub allowed: Vec<usize>,
}

impl GlobalTopicDistribution {
    pub fn topics(&self) -> usize {
        self.weights.rows()
    }

    pub fn weight(&self, topic: usize, token: usize) -> f64 {
        self.weights.row(topic)[token]
    }
}

/// Scores every allowed vocabulary token with each topic head and
/// normalizes across the allowed vocabulary.
pub fn compute_global_topics(
    params: &TopicAttentionParams,
    embeddings: &Tensor,
    allowed: &BTreeSet<usize>,
) -> Result<GlobalTopicDistribution, TopicError> {
    if allowed.is_empty() {
        return Err(TopicError::Degenerate(
            "no allowed tokens for the topic distribution",
        ));
    }
    let allowed: Vec<usize> = allowed.iter().copied().collect();
    let v = embeddings.rows();
    if let Some(&bad) = allowed.iter().find(|&&t| t >= v) {
        return Err(crate::numeric::NumericError::Index {
            op: "compute_global_topics",
            index: bad,
            len: v,
        }
        .into());
    }
    let mut rows = Vec::with_capacity(allowed.len() * embeddings.cols());
    for &t in &allowed {
        rows.extend_from_slice(embeddings.row(t));
    }
    let mut tape = Tape::new();
    let words = tape.input(Tensor::matrix(allowed.len(), embeddings.cols(), rows)?);
    let proj_w = tape.input(params.projection.clone());
    let bias = tape.input(params.bias.clone());
    let query = tape.input(params.query.clone());
    let proj = tape.matmul(words, proj_w)?;
    let logits = tape.head_logits(proj, bias, query, params.per_head)?;
    let probs = tape.masked_softmax(logits, &vec![true; allowed.len()])?;
    let probs = tape.value(probs);
    let k = params.heads();
    let mut weights = Tensor::zeros(&[k, v]);
    for topic in 0..k {
        let row = weights.row_mut(topic);
        for (j, &t) in allowed.iter().enumerate() {
            row[t] = probs.row(topic)[j];
        }
    }
    Ok(GlobalTopicDistribution { weights, allowed })
}

/// Top-`M` tokens of every topic, heaviest first.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicDescriptorSet {
    pub topics: Vec<Vec<(usize, f64)>>,
    /// Set when fewer than `M` tokens were available.
    pub short: bool,
}

impl TopicDescriptorSet {
    pub fn tokens(&self, topic: usize) -> Vec<usize> {
        self.topics[topic].iter().map(|&(t, _)| t).collect()
    }

    pub fn words<'v>(&self, topic: usize, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.topics[topic]
            .iter()
            .map(|&(t, _)| vocab.token(t))
            .collect()
    }
}

/// Picks the `m` heaviest tokens of each topic among `T`'s allowed set, or
/// among `restrict` when given. Ties go to the lower token index.
pub fn extract_descriptors(
    topics: &GlobalTopicDistribution,
    m: usize,
    restrict: Option<&BTreeSet<usize>>,
) -> Result<TopicDescriptorSet, TopicError> {
    if m == 0 {
        return Err(TopicError::Degenerate(
            "descriptor count must be at least 1",
        ));
    }
    let candidates: Vec<usize> = match restrict {
        Some(set) => topics
            .allowed
            .iter()
            .copied()
            .filter(|t| set.contains(t))
            .collect(),
        None => topics.allowed.clone(),
    };
    let short = candidates.len() < m;
    let per_topic = (0..topics.topics())
        .map(|k| {
            let row = topics.weights.row(k);
            let mut ranked: Vec<(usize, f64)> = candidates.iter().map(|&t| (t, row[t])).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(m);
            ranked
        })
        .collect();
    Ok(TopicDescriptorSet {
        topics: per_topic,
        short,
    })
}
