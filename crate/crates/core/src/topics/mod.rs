//! Global topic extraction, descriptor coherence and per-impression
//! explanations.

mod coherence;
mod explain;
mod global;
mod render;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::{ModelError, Variant};
use crate::numeric::NumericError;

pub use coherence::{
    coherence_summary, count_cooccurrence, npmi_coherence, npmi_pair, w2v_coherence,
    CoherenceScores, CoherenceSummary, CooccurrenceCounts,
};
pub use explain::{
    generate_explanation, ArticleExplanation, ExplanationReport, HistoryContribution,
    RankedCandidate, TopicWeight,
};
pub use global::{
    compute_global_topics, extract_descriptors, GlobalTopicDistribution, TopicDescriptorSet,
};
pub use render::{highlight_rows, parse_tsv_report, render_report, HighlightRow, ReportFormat};

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("explanations are not supported for the {0} variant")]
    UnsupportedVariant(Variant),
    #[error("unknown report format {0:?} (expected ansi, html or tsv)")]
    UnknownFormat(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Data(#[from] CorpusError),
}
