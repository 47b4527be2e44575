//! Per-impression ranking metrics and their averages.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    #[error("scores and labels differ in length")]
    Length,
    #[error("impression has no positive candidate")]
    NoPositive,
    #[error("impression has only one label class")]
    SingleClass,
    #[error("non-finite score")]
    NonFinite,
}

/// Candidate scores with their binary click labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredImpression {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredImpression {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self, MetricError> {
        if scores.len() != labels.len() {
            return Err(MetricError::Length);
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        Ok(ScoredImpression { scores, labels })
    }

    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    /// Candidate positions by descending score, ties in input order.
    fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| compare(self.scores[b], self.scores[a]));
        order
    }
}

/// Numeric order on finite scores; `-0.0` and `0.0` tie.
fn compare(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks.
pub fn auc(s: &ScoredImpression) -> Result<f64, MetricError> {
    let n = s.scores.len();
    let pos = s.positives();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| compare(s.scores[a], s.scores[b]));
    // ranks are doubled so tied averages stay integral
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && compare(s.scores[order[j + 1]], s.scores[order[i]]) == Ordering::Equal {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u64;
        for &idx in &order[i..=j] {
            if s.labels[idx] > 0 {
                rank_sum2 += avg2;
            }
        }
        i = j + 1;
    }
    let pos = pos as u64;
    let wins2 = rank_sum2 - pos * (pos + 1);
    Ok(wins2 as f64 / (2 * pos * neg as u64) as f64)
}

/// Mean reciprocal rank of the positives.
pub fn mrr(s: &ScoredImpression) -> Result<f64, MetricError> {
    let pos = s.positives();
    if pos == 0 {
        return Err(MetricError::NoPositive);
    }
    let total: f64 = s
        .ranking()
        .iter()
        .enumerate()
        .filter(|(_, &idx)| s.labels[idx] > 0)
        .map(|(r, _)| 1.0 / (r + 1) as f64)
        .sum();
    Ok(total / pos as f64)
}

fn dcg(labels: impl Iterator<Item = u8>, k: usize) -> f64 {
    labels
        .take(k)
        .enumerate()
        .map(|(r, l)| (2f64.powi(l as i32) - 1.0) / ((r + 2) as f64).log2())
        .sum()
}

/// DCG@k normalized by the ideal DCG@k.
pub fn ndcg_at_k(s: &ScoredImpression, k: usize) -> Result<f64, MetricError> {
    if s.positives() == 0 {
        return Err(MetricError::NoPositive);
    }
    let k = k.max(1);
    let actual = dcg(s.ranking().into_iter().map(|i| s.labels[i]), k);
    let mut ideal = s.labels.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    Ok(actual / dcg(ideal.into_iter(), k))
}

/// Mean metrics over impressions, in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub mrr: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    pub impressions: usize,
    /// Impressions left out of the AUC mean (single label class).
    pub excluded_auc: usize,
    /// Impressions left out of the MRR and nDCG means (no positive).
    pub excluded_rank: usize,
}

impl MetricReport {
    /// Unweighted means over impressions, summed in input order.
    pub fn from_impressions(items: &[ScoredImpression]) -> Self {
        let mut sums = [0.0f64; 4];
        let (mut n_auc, mut n_rank) = (0usize, 0usize);
        for s in items {
            if let Ok(a) = auc(s) {
                sums[0] += a;
                n_auc += 1;
            }
            if let (Ok(m), Ok(n5), Ok(n10)) = (mrr(s), ndcg_at_k(s, 5), ndcg_at_k(s, 10)) {
                sums[1] += m;
                sums[2] += n5;
                sums[3] += n10;
                n_rank += 1;
            }
        }
        let mean = |x: f64, n: usize| if n == 0 { f64::NAN } else { x / n as f64 };
        MetricReport {
            auc: mean(sums[0], n_auc),
            mrr: mean(sums[1], n_rank),
            ndcg5: mean(sums[2], n_rank),
            ndcg10: mean(sums[3], n_rank),
            impressions: items.len(),
            excluded_auc: items.len() - n_auc,
            excluded_rank: items.len() - n_rank,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.auc, self.mrr, self.ndcg5, self.ndcg10]
    }

    /// `AUC\tMRR\tnDCG@5\tnDCG@10` in percent with two decimals.
    pub fn tsv_row(&self) -> String {
        self.values()
            .map(|v| format!("{:.2}", 100.0 * v))
            .join("\t")
    }

    pub const TSV_HEADER: &'static str = "AUC\tMRR\tnDCG@5\tnDCG@10";

    /// Key-value text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in ["auc", "mrr", "ndcg@5", "ndcg@10"]
            .iter()
            .zip(self.values())
        {
            let _ = writeln!(out, "{k} = {:.2}", 100.0 * v);
        }
        let _ = writeln!(out, "impressions = {}", self.impressions);
        let _ = writeln!(out, "excluded_auc = {}", self.excluded_auc);
        let _ = writeln!(out, "excluded_rank = {}", self.excluded_rank);
        out
    }
}

/// Mean and sample standard deviation of each metric over repeated runs.
pub fn mean_and_std(runs: &[MetricReport]) -> [(f64, f64); 4] {
    std::array::from_fn(|m| {
        let xs: Vec<f64> = runs.iter().map(|r| r.values()[m]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    })
}
