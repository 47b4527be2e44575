use super::{GlobalTopicDistribution, TopicError};
use crate::corpus::ImpressionLog;
use crate::dataset::NewsTable;
use crate::eval::impression_history;
use crate::model::{score, Model, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct TopicWeight {
    pub topic: usize,
    /// Document-topic weight β of this topic in the article.
    pub weight: f64,
}

/// One article's selected topics and per-token highlight weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleExplanation {
    pub news_id: String,
    pub words: Vec<String>,
    /// Top topics by β, heaviest first.
    pub topics: Vec<TopicWeight>,
    /// `highlights[i][j]` is `T[topics[i].topic, token_j]`.
    pub highlights: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedCandidate {
    pub rank: usize,
    pub score: f64,
    pub label: u8,
    pub article: ArticleExplanation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryContribution {
    /// Position in the (sampled) click history, oldest first.
    pub position: usize,
    /// User-news weight γ.
    pub gamma: f64,
    pub article: ArticleExplanation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationReport {
    pub impression_id: String,
    pub user_id: String,
    /// Candidates by descending score.
    pub candidates: Vec<RankedCandidate>,
    /// Most influential history articles by descending γ.
    pub history: Vec<HistoryContribution>,
}

impl ExplanationReport {
    pub fn empty(impression_id: &str, user_id: &str) -> Self {
        ExplanationReport {
            impression_id: impression_id.to_string(),
            user_id: user_id.to_string(),
            candidates: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn articles(&self) -> impl Iterator<Item = &ArticleExplanation> {
        self.history
            .iter()
            .map(|h| &h.article)
            .chain(self.candidates.iter().map(|c| &c.article))
    }
}

fn descending(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

fn explain_article(
    model: &Model,
    table: &NewsTable,
    position: usize,
    topics: &GlobalTopicDistribution,
    top_topics: usize,
) -> Result<(ArticleExplanation, Vec<f64>), TopicError> {
    let tokens = table.tokens(position);
    let enc = model.encode(tokens)?;
    let selected: Vec<TopicWeight> = descending(&enc.doc_topic_weights)
        .into_iter()
        .take(top_topics)
        .map(|k| TopicWeight {
            topic: k,
            weight: enc.doc_topic_weights[k],
        })
        .collect();
    let highlights = selected
        .iter()
        .map(|tw| tokens.iter().map(|&t| topics.weight(tw.topic, t)).collect())
        .collect();
    Ok((
        ArticleExplanation {
            news_id: table.id(position).to_string(),
            words: table.words(position).to_vec(),
            topics: selected,
            highlights,
        },
        enc.doc_vector,
    ))
}

/// Explains the ranking of one impression with the attention-pooled user
/// model: candidates are scored and ranked, the `top_articles` history
/// items with the largest γ are kept, and every reported article lists its
/// `top_topics` heaviest topics with the global weights of its tokens.
///
/// `index` and `seed` pick the same history sample evaluation uses.
pub fn generate_explanation(
    model: &Model,
    table: &NewsTable,
    impression: &ImpressionLog,
    index: usize,
    topics: &GlobalTopicDistribution,
    top_articles: usize,
    top_topics: usize,
    seed: u64,
) -> Result<ExplanationReport, TopicError> {
    let variant = model.config().variant;
    if variant != Variant::Att {
        return Err(TopicError::UnsupportedVariant(variant));
    }
    if top_topics == 0 {
        return Err(TopicError::Degenerate(
            "at least one topic per article must be shown",
        ));
    }
    if topics.topics() != model.config().topics || topics.weights.cols() != model.vocab_size() {
        return Err(TopicError::Degenerate(
            "topic distribution does not match the model",
        ));
    }
    let history = impression_history(impression, table, model.config().history_limit, seed, index)?;
    let mut history_articles = Vec::with_capacity(history.len());
    let mut history_vectors = Vec::with_capacity(history.len());
    for &p in &history {
        let (article, vector) = explain_article(model, table, p, topics, top_topics)?;
        history_articles.push(article);
        history_vectors.push(vector);
    }
    let user = model.user(&history_vectors)?;

    let mut scored = Vec::with_capacity(impression.candidates.len());
    for (id, label) in &impression.candidates {
        let (article, vector) =
            explain_article(model, table, table.position(id)?, topics, top_topics)?;
        scored.push((score(&user.vector, &vector)?, *label, article));
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let mut slots: Vec<Option<(f64, u8, ArticleExplanation)>> =
        scored.into_iter().map(Some).collect();
    let candidates = descending(&scores)
        .into_iter()
        .enumerate()
        .map(|(rank, i)| {
            let (score, label, article) = slots[i].take().expect("each candidate ranked once");
            RankedCandidate {
                rank: rank + 1,
                score,
                label,
                article,
            }
        })
        .collect();

    let mut history_slots: Vec<Option<ArticleExplanation>> =
        history_articles.into_iter().map(Some).collect();
    let history = descending(&user.gamma)
        .into_iter()
        .take(top_articles)
        .map(|i| HistoryContribution {
            position: i,
            gamma: user.gamma[i],
            article: history_slots[i]
                .take()
                .expect("each history item selected once"),
        })
        .collect();

    Ok(ExplanationReport {
        impression_id: impression.impression_id.clone(),
        user_id: impression.user_id.clone(),
        candidates,
        history,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::corpus::{DocumentLayout, EmbeddingMatrix, NewsArticle, Vocabulary};
    use crate::model::ModelConfig;
    use crate::topics::compute_global_topics;

    fn article(id: &str, title: &str) -> NewsArticle {
        NewsArticle {
            news_id: id.into(),
            category: String::new(),
            subcategory: String::new(),
            title: title.into(),
            abstract_text: String::new(),
            url: String::new(),
            body: String::new(),
        }
    }

    struct Fixture {
        model: Model,
        table: NewsTable,
        topics: GlobalTopicDistribution,
        impression: ImpressionLog,
    }

    fn fixture(variant: Variant) -> Fixture {
        let news = vec![
            article("N1", "storm flood rain warning"),
            article("N2", "league striker goal match"),
            article("N3", "election vote senate ballot"),
            article("N4", "storm flood rain warning"),
            article("N5", "goal match coach"),
        ];
        let words: Vec<String> = news
            .iter()
            .flat_map(|a| a.title.split(' ').map(str::to_string))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let vocab = Vocabulary::from_tokens(words);
        let config = ModelConfig {
            variant,
            topics: 4,
            embedding_dim: 6,
            topic_proj_dim: 5,
            pool_proj_dim: 5,
            user_proj_dim: 5,
            ..ModelConfig::default()
        };
        let emb = EmbeddingMatrix::random(vocab.len(), 6, 3).into_tensor();
        let model = Model::new(config, emb, 11).unwrap();
        let table = NewsTable::build(&news, &vocab, DocumentLayout::default()).unwrap();
        let allowed: BTreeSet<usize> = (2..vocab.len()).collect();
        let topics =
            compute_global_topics(&model.topic_params(), model.embeddings(), &allowed).unwrap();
        let impression = ImpressionLog {
            impression_id: "7".into(),
            user_id: "U1".into(),
            timestamp: String::new(),
            history: vec!["N1".into(), "N2".into(), "N3".into()],
            candidates: vec![("N4".into(), 1), ("N5".into(), 0)],
        };
        Fixture {
            model,
            table,
            topics,
            impression,
        }
    }

    #[test]
    fn report_satisfies_structural_invariants() {
        let f = fixture(Variant::Att);
        let r =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 2, 3, 5).unwrap();
        assert_eq!(r.candidates.len(), 2);
        assert_eq!(r.history.len(), 2);
        assert!(r.candidates.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(r.history.windows(2).all(|w| w[0].gamma >= w[1].gamma));
        for a in r.articles() {
            let p = f.table.position(&a.news_id).unwrap();
            assert_eq!(a.topics.len(), 3);
            assert!(a.topics.windows(2).all(|w| w[0].weight >= w[1].weight));
            for (tw, row) in a.topics.iter().zip(&a.highlights) {
                let expect: Vec<f64> = f
                    .table
                    .tokens(p)
                    .iter()
                    .map(|&t| f.topics.weight(tw.topic, t))
                    .collect();
                assert_eq!(row, &expect);
            }
        }
    }

    #[test]
    fn all_topics_listed_when_asked() {
        let f = fixture(Variant::Att);
        let r =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 3, 4, 5).unwrap();
        for a in r.articles() {
            let ids: BTreeSet<usize> = a.topics.iter().map(|t| t.topic).collect();
            assert_eq!(ids.len(), 4);
            assert!(a.topics.windows(2).all(|w| w[0].weight >= w[1].weight));
        }
    }

    #[test]
    fn identical_candidate_shares_top_topic_with_history_article() {
        let f = fixture(Variant::Att);
        let r =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 3, 3, 5).unwrap();
        let cand = r
            .candidates
            .iter()
            .find(|c| c.article.news_id == "N4")
            .unwrap();
        let hist = r
            .history
            .iter()
            .find(|h| h.article.news_id == "N1")
            .unwrap();
        assert_eq!(cand.article.topics[0].topic, hist.article.topics[0].topic);
        assert_eq!(cand.article.highlights, hist.article.highlights);
    }

    #[test]
    fn deterministic() {
        let f = fixture(Variant::Att);
        let a =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 2, 3, 5).unwrap();
        let b =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 2, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cold_user_has_empty_history() {
        let mut f = fixture(Variant::Att);
        f.impression.history.clear();
        let r =
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 2, 3, 5).unwrap();
        assert!(r.history.is_empty());
        assert_eq!(r.candidates.len(), 2);
        assert!(r.candidates.iter().all(|c| c.score == 0.0));
    }

    #[test]
    fn gru_is_rejected() {
        let f = fixture(Variant::Gru);
        assert!(matches!(
            generate_explanation(&f.model, &f.table, &f.impression, 0, &f.topics, 2, 3, 5),
            Err(TopicError::UnsupportedVariant(Variant::Gru))
        ));
    }
}
