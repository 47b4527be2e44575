use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, CorpusError};

/// One news item in MIND layout, plus optional body text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewsArticle {
    pub news_id: String,
    pub category: String,
    pub subcategory: String,
    pub title: String,
    pub abstract_text: String,
    pub url: String,
    pub body: String,
}

impl NewsArticle {
    /// Title, abstract and body joined with spaces.
    pub fn full_text(&self) -> String {
        let mut s = self.title.clone();
        for part in [&self.abstract_text, &self.body] {
            if !part.is_empty() {
                s.push(' ');
                s.push_str(part);
            }
        }
        s
    }
}

const MIN_NEWS_COLUMNS: usize = 5;

/// Parses MIND `news.tsv` content. Columns past the abstract are optional;
/// anything after the abstract entities is ignored.
pub fn parse_news_str(content: &str, origin: &str) -> Result<Vec<NewsArticle>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < MIN_NEWS_COLUMNS {
            return Err(CorpusError::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message: format!(
                    "expected at least {MIN_NEWS_COLUMNS} tab-separated columns, found {}",
                    cols.len()
                ),
            });
        }
        let news_id = cols[0].trim();
        if news_id.is_empty() {
            return Err(CorpusError::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message: "empty news id".into(),
            });
        }
        if !seen.insert(news_id.to_string()) {
            return Err(CorpusError::DuplicateNews(news_id.to_string()));
        }
        out.push(NewsArticle {
            news_id: news_id.to_string(),
            category: cols[1].to_string(),
            subcategory: cols[2].to_string(),
            title: cols[3].to_string(),
            abstract_text: cols[4].to_string(),
            url: cols.get(5).map_or_else(String::new, |s| s.to_string()),
            body: String::new(),
        });
    }
    Ok(out)
}

pub fn parse_news_tsv(path: impl AsRef<Path>) -> Result<Vec<NewsArticle>, CorpusError> {
    let path = path.as_ref();
    parse_news_str(&read_text(path)?, &path.display().to_string())
}

/// Reads a `[news_id, body]` sidecar and fills in matching articles' bodies.
/// Returns how many articles received a body.
pub fn attach_bodies(
    articles: &mut [NewsArticle],
    path: impl AsRef<Path>,
) -> Result<usize, CorpusError> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut bodies = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = line.split_once('\t').ok_or_else(|| CorpusError::Parse {
            origin: path.display().to_string(),
            line: i + 1,
            message: "expected news_id<TAB>body".into(),
        })?;
        bodies.insert(id.trim().to_string(), body.to_string());
    }
    let mut n = 0;
    for a in articles.iter_mut() {
        if let Some(b) = bodies.remove(&a.news_id) {
            a.body = b;
            n += 1;
        }
    }
    Ok(n)
}

/// Merges several news files. Later files may repeat ids already seen; the
/// first occurrence wins.
pub fn merge_news(parts: Vec<Vec<NewsArticle>>) -> Vec<NewsArticle> {
    let mut seen = HashSet::new();
    parts
        .into_iter()
        .flatten()
        .filter(|a| seen.insert(a.news_id.clone()))
        .collect()
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

/// Serializes articles in MIND layout with empty entity columns.
pub fn write_news_tsv(articles: &[NewsArticle]) -> String {
    let mut s = String::new();
    for a in articles {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t[]\t[]",
            a.news_id,
            clean(&a.category),
            clean(&a.subcategory),
            clean(&a.title),
            clean(&a.abstract_text),
            clean(&a.url)
        );
    }
    s
}

/// Serializes non-empty bodies as a `[news_id, body]` sidecar.
pub fn write_bodies_tsv(articles: &[NewsArticle]) -> String {
    let mut s = String::new();
    for a in articles.iter().filter(|a| !a.body.is_empty()) {
        let _ = writeln!(s, "{}\t{}", a.news_id, clean(&a.body));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mind_line() {
        let got = parse_news_str("N1\tsports\tsoccer\tTitle A\tAbs A\thttp://u\n", "t").unwrap();
        assert_eq!(
            got,
            vec![NewsArticle {
                news_id: "N1".into(),
                category: "sports".into(),
                subcategory: "soccer".into(),
                title: "Title A".into(),
                abstract_text: "Abs A".into(),
                url: "http://u".into(),
                body: String::new(),
            }]
        );
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(parse_news_str("", "t").unwrap().is_empty());
    }

    #[test]
    fn short_line_reports_line_number() {
        let err = parse_news_str("N1\ta\tb\tt\tx\tu\nN2\ta\tb\n", "t").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse_news_str("N1\ta\tb\tt\tx\nN1\ta\tb\tt\tx\n", "t").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateNews(ref id) if id == "N1"));
    }

    #[test]
    fn extra_columns_ignored_and_missing_abstract_empty() {
        let got = parse_news_str("N1\ta\tb\tTitle\t\tu\t[]\t[]\textra\n", "t").unwrap();
        assert_eq!(got[0].abstract_text, "");
        assert_eq!(got[0].title, "Title");
    }

    #[test]
    fn write_then_parse_keeps_fields() {
        let a = parse_news_str("N9\tnews\tworld\tA title\tAn abstract\thttp://x\n", "t").unwrap();
        let b = parse_news_str(&write_news_tsv(&a), "t").unwrap();
        assert_eq!(a, b);
    }
}
