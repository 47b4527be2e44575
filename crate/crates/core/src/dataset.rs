//! Token-index view of a news corpus, shared by training, evaluation and
//! explanation.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{
    document_words, CorpusError, DocumentLayout, ImpressionLog, NewsArticle, Vocabulary, OOV_INDEX,
    OOV_TOKEN,
};

/// Every article's real token indices, addressable by news id.
#[derive(Clone, Debug, PartialEq)]
pub struct NewsTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    tokens: Vec<Vec<usize>>,
    words: Vec<Vec<String>>,
    /// Articles with no tokens at all, stored as a single OOV token.
    pub empty_documents: usize,
}

impl NewsTable {
    pub fn build(
        articles: &[NewsArticle],
        vocab: &Vocabulary,
        layout: DocumentLayout,
    ) -> Result<Self, CorpusError> {
        let mut table = NewsTable {
            ids: Vec::with_capacity(articles.len()),
            index: HashMap::with_capacity(articles.len()),
            tokens: Vec::with_capacity(articles.len()),
            words: Vec::with_capacity(articles.len()),
            empty_documents: 0,
        };
        for a in articles {
            if table.index.contains_key(&a.news_id) {
                return Err(CorpusError::DuplicateNews(a.news_id.clone()));
            }
            let mut words = document_words(a, layout);
            let mut real: Vec<usize> = words.iter().map(|w| vocab.lookup(w)).collect();
            if real.is_empty() {
                table.empty_documents += 1;
                real.push(OOV_INDEX);
                words.push(OOV_TOKEN.to_string());
            }
            table.index.insert(a.news_id.clone(), table.ids.len());
            table.ids.push(a.news_id.clone());
            table.tokens.push(real);
            table.words.push(words);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, news_id: &str) -> Result<usize, CorpusError> {
        self.index
            .get(news_id)
            .copied()
            .ok_or_else(|| CorpusError::UnknownNews(news_id.to_string()))
    }

    pub fn id(&self, position: usize) -> &str {
        &self.ids[position]
    }

    pub fn tokens(&self, position: usize) -> &[usize] {
        &self.tokens[position]
    }

    /// The original words behind [`NewsTable::tokens`], position by position.
    pub fn words(&self, position: usize) -> &[String] {
        &self.words[position]
    }

    pub fn positions(&self, ids: &[String]) -> Result<Vec<usize>, CorpusError> {
        ids.iter().map(|id| self.position(id)).collect()
    }
}

/// Vocabulary over the articles referenced by `impressions`, using the
/// words that fit into the document layout.
pub fn training_vocabulary(
    articles: &[NewsArticle],
    impressions: &[ImpressionLog],
    layout: DocumentLayout,
    min_freq: usize,
) -> Vocabulary {
    let referenced: BTreeSet<&str> = impressions
        .iter()
        .flat_map(|imp| {
            imp.history
                .iter()
                .map(String::as_str)
                .chain(imp.candidates.iter().map(|(id, _)| id.as_str()))
        })
        .collect();
    let docs: Vec<Vec<String>> = articles
        .iter()
        .filter(|a| referenced.contains(a.news_id.as_str()))
        .map(|a| document_words(a, layout))
        .collect();
    Vocabulary::build(docs.iter().map(Vec::as_slice), min_freq)
}

/// Mixes a base seed with a stream index so every impression, epoch and
/// batch gets an independent deterministic seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
