//! Scoring impressions with a frozen model.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{sample_history, CorpusError, ImpressionLog};
use crate::dataset::{derive_seed, NewsTable};
use crate::metrics::{MetricError, MetricReport, ScoredImpression};
use crate::model::{score, Model, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// History positions used to build the user vector of impression `index`.
pub fn impression_history(
    imp: &ImpressionLog,
    table: &NewsTable,
    limit: usize,
    seed: u64,
    index: usize,
) -> Result<Vec<usize>, CorpusError> {
    let picked = sample_history(&imp.history, limit, derive_seed(seed, index as u64));
    table.positions(&picked)
}

/// Evaluation-mode document vectors for the given table positions.
pub fn encode_documents(
    model: &Model,
    table: &NewsTable,
    positions: impl IntoIterator<Item = usize>,
) -> Result<HashMap<usize, Vec<f64>>, ModelError> {
    let wanted: Vec<usize> = positions
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vectors = wanted
        .par_iter()
        .map(|&p| model.doc_vector(table.tokens(p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(wanted.into_iter().zip(vectors).collect())
}

/// Scores every candidate of every impression. History sampling uses
/// `seed` so repeated calls are identical.
pub fn score_impressions(
    model: &Model,
    table: &NewsTable,
    impressions: &[ImpressionLog],
    seed: u64,
) -> Result<Vec<ScoredImpression>, EvalError> {
    let limit = model.config().history_limit;
    let mut histories = Vec::with_capacity(impressions.len());
    let mut candidates = Vec::with_capacity(impressions.len());
    for (i, imp) in impressions.iter().enumerate() {
        histories.push(impression_history(imp, table, limit, seed, i)?);
        candidates.push(
            table.positions(
                &imp.candidates
                    .iter()
                    .map(|(id, _)| id.clone())
                    .collect::<Vec<_>>(),
            )?,
        );
    }
    let docs = encode_documents(
        model,
        table,
        histories.iter().chain(&candidates).flatten().copied(),
    )?;
    impressions
        .par_iter()
        .zip(histories.par_iter().zip(candidates.par_iter()))
        .map(|(imp, (hist, cands))| {
            let history: Vec<Vec<f64>> = hist.iter().map(|p| docs[p].clone()).collect();
            let user = model.user(&history)?;
            let scores = cands
                .iter()
                .map(|p| score(&user.vector, &docs[p]))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ScoredImpression::new(scores, imp.labels())?)
        })
        .collect()
}

pub fn evaluate(
    model: &Model,
    table: &NewsTable,
    impressions: &[ImpressionLog],
    seed: u64,
) -> Result<MetricReport, EvalError> {
    Ok(MetricReport::from_impressions(&score_impressions(
        model,
        table,
        impressions,
        seed,
    )?))
}
