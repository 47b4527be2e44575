//! MIND-format ingestion: news and behavior TSVs, tokenization, vocabulary,
//! fixed-length document assembly, pretrained vectors, topic preprocessing,
//! and a planted-topic synthetic dataset generator.

mod assemble;
mod behaviors;
mod embeddings;
mod filter;
mod news;
pub mod synth;
mod text;
mod vocab;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use assemble::{
    assemble_document, document_words, sample_history, DocumentLayout, TokenSequence,
};
pub use behaviors::{parse_behaviors_str, parse_behaviors_tsv, write_behaviors_tsv, ImpressionLog};
pub use embeddings::{
    load_pretrained_embeddings, parse_pretrained_embeddings, write_embeddings_text,
    EmbeddingMatrix, FALLBACK_STD,
};
pub use filter::{document_token_sets, preprocess_for_topics};
pub use news::{
    attach_bodies, merge_news, parse_news_str, parse_news_tsv, write_bodies_tsv, write_news_tsv,
    NewsArticle,
};
pub use synth::{generate_synthetic_dataset, SynthConfig, SyntheticDataset};
pub use text::{tokenize, StopwordList};
pub use vocab::{Vocabulary, OOV_INDEX, OOV_TOKEN, PAD_INDEX, PAD_TOKEN};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate news id {0}")]
    DuplicateNews(String),
    #[error("article {0} has no usable tokens")]
    EmptyDocument(String),
    #[error("unknown news id {0}")]
    UnknownNews(String),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

pub(crate) fn read_text(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}
