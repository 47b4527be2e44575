use std::fmt::Write;
use std::str::FromStr;

use super::{ArticleExplanation, ExplanationReport, TopicError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Ansi,
    Html,
    Tsv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Ansi => "txt",
            ReportFormat::Html => "html",
            ReportFormat::Tsv => "tsv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ansi" => Ok(ReportFormat::Ansi),
            "html" => Ok(ReportFormat::Html),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(TopicError::UnknownFormat(other.to_string())),
        }
    }
}

/// Topic slot colors; slot `i` is the article's `i`-th heaviest topic.
const PALETTE: [(u8, u8, u8); 6] = [
    (230, 85, 13),
    (49, 130, 189),
    (49, 163, 84),
    (117, 107, 177),
    (214, 39, 40),
    (140, 86, 75),
];

fn color(slot: usize) -> (u8, u8, u8) {
    PALETTE[slot % PALETTE.len()]
}

/// Strongest topic slot of every token with its weight relative to the
/// heaviest token of that topic in the article.
fn token_highlights(article: &ArticleExplanation) -> Vec<Option<(usize, f64)>> {
    let maxima: Vec<f64> = article
        .highlights
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .collect();
    (0..article.words.len())
        .map(|j| {
            let mut best: Option<(usize, f64)> = None;
            for (slot, row) in article.highlights.iter().enumerate() {
                if maxima[slot] > 0.0 {
                    let rel = row[j] / maxima[slot];
                    if rel > 0.0 && best.is_none_or(|(_, b)| rel > b) {
                        best = Some((slot, rel));
                    }
                }
            }
            best
        })
        .collect()
}

pub fn render_report(report: &ExplanationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Ansi => render_ansi(report),
        ReportFormat::Html => render_html(report),
        ReportFormat::Tsv => render_tsv(report),
    }
}

fn ansi_article(out: &mut String, article: &ArticleExplanation) {
    let marks = token_highlights(article);
    let mut line = String::from("    ");
    for (word, mark) in article.words.iter().zip(marks) {
        match mark {
            Some((slot, rel)) => {
                let (r, g, b) = color(slot);
                let mix = |c: u8| (255.0 - (255.0 - f64::from(c)) * rel).round() as u8;
                let _ = write!(
                    line,
                    "\x1b[30;48;2;{};{};{}m{word}\x1b[0m ",
                    mix(r),
                    mix(g),
                    mix(b)
                );
            }
            None => {
                let _ = write!(line, "{word} ");
            }
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
    let legend: Vec<String> = article
        .topics
        .iter()
        .enumerate()
        .map(|(slot, t)| {
            let (r, g, b) = color(slot);
            format!(
                "\x1b[38;2;{r};{g};{b}m\u{25a0}\x1b[0m topic {} ({:.4})",
                t.topic, t.weight
            )
        })
        .collect();
    let _ = writeln!(out, "    {}", legend.join("  "));
}

fn render_ansi(report: &ExplanationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\x1b[1mImpression {} (user {})\x1b[0m",
        report.impression_id, report.user_id
    );
    let _ = writeln!(out, "\x1b[1mRanked candidates\x1b[0m");
    for c in &report.candidates {
        let _ = writeln!(
            out,
            "  #{} {} score {:.4} label {}",
            c.rank, c.article.news_id, c.score, c.label
        );
        ansi_article(&mut out, &c.article);
    }
    let _ = writeln!(out, "\x1b[1mContributing history\x1b[0m");
    for h in &report.history {
        let _ = writeln!(
            out,
            "  {} gamma {:.4} (position {})",
            h.article.news_id, h.gamma, h.position
        );
        ansi_article(&mut out, &h.article);
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn html_article(out: &mut String, article: &ArticleExplanation) {
    out.push_str("<p class=\"article\">");
    for (j, (word, mark)) in article
        .words
        .iter()
        .zip(token_highlights(article))
        .enumerate()
    {
        if j > 0 {
            out.push(' ');
        }
        match mark {
            Some((slot, rel)) => {
                let (r, g, b) = color(slot);
                let _ = write!(
                    out,
                    "<span style=\"background-color: rgba({r}, {g}, {b}, {rel:.3})\" title=\"topic {} weight {}\">{}</span>",
                    article.topics[slot].topic,
                    article.highlights[slot][j],
                    escape(word)
                );
            }
            None => out.push_str(&escape(word)),
        }
    }
    out.push_str("</p>\n<p class=\"topics\">");
    for (slot, t) in article.topics.iter().enumerate() {
        let (r, g, b) = color(slot);
        let _ = write!(
            out,
            "<span class=\"swatch\" style=\"background-color: rgb({r}, {g}, {b})\">topic {}</span> {:.4} ",
            t.topic, t.weight
        );
    }
    out.push_str("</p>\n");
}

fn render_html(report: &ExplanationReport) -> String {
    let mut out = String::new();
    let title = format!(
        "Explanation for impression {}",
        escape(&report.impression_id)
    );
    out.push_str("<!DOCTYPE html>\n<html xmlns=\"http://www.w3.org/1999/xhtml\">\n<head>\n<meta charset=\"utf-8\" />\n");
    let _ = writeln!(out, "<title>{title}</title>");
    out.push_str(
        "<style>body { font-family: sans-serif; } span { padding: 0 2px; border-radius: 3px; } \
         .swatch { color: white; } .meta { color: #555; }</style>\n</head>\n<body>\n",
    );
    let _ = writeln!(
        out,
        "<h1>{title}</h1>\n<p class=\"meta\">user {}</p>",
        escape(&report.user_id)
    );
    out.push_str("<h2>Ranked candidates</h2>\n");
    for c in &report.candidates {
        let _ = writeln!(
            out,
            "<h3>#{} {} <span class=\"meta\">score {:.4}, label {}</span></h3>",
            c.rank,
            escape(&c.article.news_id),
            c.score,
            c.label
        );
        html_article(&mut out, &c.article);
    }
    out.push_str("<h2>Contributing history</h2>\n");
    for h in &report.history {
        let _ = writeln!(
            out,
            "<h3>{} <span class=\"meta\">gamma {:.4}, position {}</span></h3>",
            escape(&h.article.news_id),
            h.gamma,
            h.position
        );
        html_article(&mut out, &h.article);
    }
    out.push_str("</body>\n</html>\n");
    out
}

const TSV_HEADER: &str = "article\ttoken\ttopic\tweight";

/// One `(article, token, topic, weight)` highlight.
#[derive(Clone, Debug, PartialEq)]
pub struct HighlightRow {
    pub article: String,
    pub token: String,
    pub topic: usize,
    pub weight: f64,
}

/// Highlight rows in report order: history articles, then candidates.
pub fn highlight_rows(report: &ExplanationReport) -> Vec<HighlightRow> {
    let mut rows = Vec::new();
    for article in report.articles() {
        for (t, weights) in article.topics.iter().zip(&article.highlights) {
            for (word, &w) in article.words.iter().zip(weights) {
                rows.push(HighlightRow {
                    article: article.news_id.clone(),
                    token: word.clone(),
                    topic: t.topic,
                    weight: w,
                });
            }
        }
    }
    rows
}

fn render_tsv(report: &ExplanationReport) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in highlight_rows(report) {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.article, r.token, r.topic, r.weight);
    }
    out
}

pub fn parse_tsv_report(text: &str) -> Result<Vec<HighlightRow>, TopicError> {
    let mut lines = text.lines();
    if lines.next() != Some(TSV_HEADER) {
        return Err(TopicError::Degenerate("explanation TSV header missing"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(TopicError::Degenerate(
                    "explanation TSV row needs four columns",
                ));
            }
            Ok(HighlightRow {
                article: f[0].to_string(),
                token: f[1].to_string(),
                topic: f[2]
                    .parse()
                    .map_err(|_| TopicError::Degenerate("bad topic id"))?,
                weight: f[3]
                    .parse()
                    .map_err(|_| TopicError::Degenerate("bad highlight weight"))?,
            })
        })
        .collect()
}
