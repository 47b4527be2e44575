use std::collections::{BTreeSet, HashMap};

use super::{TopicDescriptorSet, TopicError};
use crate::numeric::Tensor;

/// Document-level binary occurrence statistics of a reference corpus.
/// Pair counts are computed on demand from sorted posting lists.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceCounts {
    documents: usize,
    postings: HashMap<usize, Vec<u32>>,
}

impl CooccurrenceCounts {
    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn df(&self, token: usize) -> usize {
        self.postings.get(&token).map_or(0, Vec::len)
    }

    /// Number of documents containing both tokens.
    pub fn co_df(&self, a: usize, b: usize) -> usize {
        let (Some(x), Some(y)) = (self.postings.get(&a), self.postings.get(&b)) else {
            return 0;
        };
        if a == b {
            return x.len();
        }
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn probability(&self, token: usize) -> f64 {
        self.df(token) as f64 / self.documents as f64
    }

    pub fn joint_probability(&self, a: usize, b: usize) -> f64 {
        self.co_df(a, b) as f64 / self.documents as f64
    }
}

/// Counts which documents contain each token. Only tokens in `allowed` are
/// tracked when it is given.
pub fn count_cooccurrence(
    documents: &[BTreeSet<usize>],
    allowed: Option<&BTreeSet<usize>>,
) -> CooccurrenceCounts {
    let mut postings: HashMap<usize, Vec<u32>> = HashMap::new();
    for (d, doc) in documents.iter().enumerate() {
        for &t in doc {
            if allowed.is_none_or(|a| a.contains(&t)) {
                postings.entry(t).or_default().push(d as u32);
            }
        }
    }
    CooccurrenceCounts {
        documents: documents.len(),
        postings,
    }
}

/// `log((P(i,j)+ε) / (P(i)P(j))) / −log(P(i,j)+ε)`. A token that never
/// occurs scores −1; a pair present in every document scores 1.
pub fn npmi_pair(counts: &CooccurrenceCounts, a: usize, b: usize, epsilon: f64) -> f64 {
    let (pa, pb) = (counts.probability(a), counts.probability(b));
    if pa == 0.0 || pb == 0.0 {
        return -1.0;
    }
    let joint = counts.joint_probability(a, b);
    if joint >= 1.0 {
        return 1.0;
    }
    ((joint + epsilon) / (pa * pb)).ln() / -(joint + epsilon).ln()
}

/// Per-topic coherence scores and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceScores {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// Pairs left out (zero-norm vectors for W2V).
    pub skipped_pairs: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Mean pair NPMI of each topic's descriptors.
pub fn npmi_coherence(
    descriptors: &TopicDescriptorSet,
    counts: &CooccurrenceCounts,
    epsilon: f64,
) -> Result<CoherenceScores, TopicError> {
    if !(epsilon > 0.0) {
        return Err(TopicError::Degenerate("NPMI epsilon must be positive"));
    }
    if counts.documents() == 0 {
        return Err(TopicError::Degenerate(
            "NPMI needs a non-empty reference corpus",
        ));
    }
    let mut per_topic = Vec::with_capacity(descriptors.topics.len());
    for k in 0..descriptors.topics.len() {
        let toks = descriptors.tokens(k);
        if toks.len() < 2 {
            return Err(TopicError::Degenerate(
                "coherence needs at least two descriptors per topic",
            ));
        }
        let scores: Vec<f64> = pairs(toks.len())
            .map(|(i, j)| npmi_pair(counts, toks[i], toks[j], epsilon))
            .collect();
        per_topic.push(mean(&scores));
    }
    if per_topic.is_empty() {
        return Err(TopicError::Degenerate("no topics to score"));
    }
    Ok(CoherenceScores {
        mean: mean(&per_topic),
        per_topic,
        skipped_pairs: 0,
    })
}

/// Mean pairwise cosine similarity of each topic's descriptor vectors.
/// Pairs with a zero vector are skipped; a topic with no scorable pair
/// scores 0.
pub fn w2v_coherence(
    descriptors: &TopicDescriptorSet,
    embeddings: &Tensor,
) -> Result<CoherenceScores, TopicError> {
    let mut per_topic = Vec::with_capacity(descriptors.topics.len());
    let mut skipped = 0;
    for k in 0..descriptors.topics.len() {
        let toks = descriptors.tokens(k);
        if toks.len() < 2 {
            return Err(TopicError::Degenerate(
                "coherence needs at least two descriptors per topic",
            ));
        }
        let mut scores = Vec::new();
        for (i, j) in pairs(toks.len()) {
            let (a, b) = (embeddings.row(toks[i]), embeddings.row(toks[j]));
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                skipped += 1;
                continue;
            }
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            scores.push((dot / (na * nb)).clamp(-1.0, 1.0));
        }
        per_topic.push(if scores.is_empty() {
            0.0
        } else {
            mean(&scores)
        });
    }
    if per_topic.is_empty() {
        return Err(TopicError::Degenerate("no topics to score"));
    }
    Ok(CoherenceScores {
        mean: mean(&per_topic),
        per_topic,
        skipped_pairs: skipped,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceSummary {
    pub mean: f64,
    /// Mean of the best `ceil(fraction · K)` topics.
    pub top_mean: f64,
    pub top_count: usize,
    /// All scores, descending.
    pub distribution: Vec<f64>,
}

pub fn coherence_summary(
    per_topic: &[f64],
    top_fraction: f64,
) -> Result<CoherenceSummary, TopicError> {
    if per_topic.is_empty() {
        return Err(TopicError::Degenerate("no topic scores to summarize"));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(TopicError::Degenerate("top fraction must lie in (0, 1]"));
    }
    let mut sorted = per_topic.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top_count = ((top_fraction * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(CoherenceSummary {
        mean: mean(per_topic),
        top_mean: mean(&sorted[..top_count]),
        top_count,
        distribution: sorted,
    })
}
