use std::collections::{BTreeSet, HashMap};

use super::{tokenize, CorpusError, NewsArticle, StopwordList, Vocabulary};

/// The set of distinct in-vocabulary token indices of each article's full
/// text (title, abstract, body). Reserved indices are never included.
pub fn document_token_sets(corpus: &[NewsArticle], vocab: &Vocabulary) -> Vec<BTreeSet<usize>> {
    corpus
        .iter()
        .map(|a| {
            tokenize(&a.full_text())
                .iter()
                .filter_map(|t| vocab.get(t))
                .collect()
        })
        .collect()
}

/// Tokens that survive stopword removal and document-frequency bounds:
/// `min_df ≤ df ≤ max_df_frac · |corpus|`.
pub fn preprocess_for_topics(
    corpus: &[NewsArticle],
    vocab: &Vocabulary,
    stopwords: &StopwordList,
    min_df: usize,
    max_df_frac: f64,
) -> Result<BTreeSet<usize>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Degenerate(
            "topic preprocessing needs a non-empty corpus",
        ));
    }
    if !(max_df_frac > 0.0 && max_df_frac <= 1.0) {
        return Err(CorpusError::Degenerate("max_df_frac must lie in (0, 1]"));
    }
    let mut df: HashMap<usize, usize> = HashMap::new();
    for set in document_token_sets(corpus, vocab) {
        for t in set {
            *df.entry(t).or_default() += 1;
        }
    }
    let upper = max_df_frac * corpus.len() as f64;
    Ok(df
        .into_iter()
        .filter(|&(t, n)| n >= min_df && (n as f64) <= upper && !stopwords.contains(vocab.token(t)))
        .map(|(t, _)| t)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Vec<NewsArticle> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| NewsArticle {
                news_id: format!("N{i}"),
                category: String::new(),
                subcategory: String::new(),
                title: t.to_string(),
                abstract_text: String::new(),
                url: String::new(),
                body: String::new(),
            })
            .collect()
    }

    fn vocab_of(c: &[NewsArticle]) -> Vocabulary {
        let docs: Vec<Vec<String>> = c.iter().map(|a| tokenize(&a.full_text())).collect();
        Vocabulary::build(docs.iter().map(Vec::as_slice), 1)
    }

    #[test]
    fn ubiquitous_token_excluded() {
        let c = corpus(&["alpha beta", "alpha gamma", "alpha delta"]);
        let v = vocab_of(&c);
        let kept = preprocess_for_topics(&c, &v, &StopwordList::empty(), 1, 0.9).unwrap();
        assert!(!kept.contains(&v.lookup("alpha")));
        assert!(kept.contains(&v.lookup("beta")));
    }

    #[test]
    fn stopwords_excluded_regardless_of_frequency() {
        let c = corpus(&["the cat", "dog", "fish"]);
        let v = vocab_of(&c);
        let kept = preprocess_for_topics(&c, &v, &StopwordList::english(), 1, 1.0).unwrap();
        assert!(!kept.contains(&v.lookup("the")));
        assert!(kept.contains(&v.lookup("cat")));
    }

    #[test]
    fn two_of_three_documents_kept_at_min_df_two() {
        let c = corpus(&["tok x", "tok y", "z"]);
        let v = vocab_of(&c);
        let kept = preprocess_for_topics(&c, &v, &StopwordList::empty(), 2, 0.9).unwrap();
        assert!(kept.contains(&v.lookup("tok")));
        assert!(!kept.contains(&v.lookup("x")));
    }

    #[test]
    fn empty_corpus_is_degenerate() {
        let v = Vocabulary::from_tokens(Vec::<String>::new());
        assert!(preprocess_for_topics(&[], &v, &StopwordList::empty(), 1, 0.9).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_thresholds(
            docs in proptest::collection::vec(proptest::collection::vec(0usize..12, 1..8), 1..25),
            min_a in 1usize..5, min_b in 1usize..5,
            frac_a in 0.05f64..1.0, frac_b in 0.05f64..1.0,
        ) {
            let texts: Vec<String> = docs.iter()
                .map(|d| d.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" "))
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let c = corpus(&refs);
            let v = vocab_of(&c);
            let sw = StopwordList::empty();
            let (lo, hi) = (min_a.min(min_b), min_a.max(min_b));
            let a = preprocess_for_topics(&c, &v, &sw, lo, frac_a).unwrap();
            let b = preprocess_for_topics(&c, &v, &sw, hi, frac_a).unwrap();
            prop_assert!(b.is_subset(&a));
            let (flo, fhi) = (frac_a.min(frac_b), frac_a.max(frac_b));
            let a = preprocess_for_topics(&c, &v, &sw, lo, flo).unwrap();
            let b = preprocess_for_topics(&c, &v, &sw, lo, fhi).unwrap();
            prop_assert!(a.is_subset(&b));
        }
    }
}
