use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, CorpusError};

/// One impression: a user's click history and the labelled candidates shown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImpressionLog {
    pub impression_id: String,
    pub user_id: String,
    pub timestamp: String,
    pub history: Vec<String>,
    pub candidates: Vec<(String, u8)>,
}

impl ImpressionLog {
    pub fn positives(&self) -> impl Iterator<Item = &str> {
        self.candidates
            .iter()
            .filter(|(_, l)| *l == 1)
            .map(|(id, _)| id.as_str())
    }

    pub fn negatives(&self) -> impl Iterator<Item = &str> {
        self.candidates
            .iter()
            .filter(|(_, l)| *l == 0)
            .map(|(id, _)| id.as_str())
    }

    pub fn labels(&self) -> Vec<u8> {
        self.candidates.iter().map(|(_, l)| *l).collect()
    }
}

fn parse_candidate(token: &str) -> Option<(String, u8)> {
    let (id, label) = token.rsplit_once('-')?;
    if id.is_empty() {
        return None;
    }
    let label = match label {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    Some((id.to_string(), label))
}

pub fn parse_behaviors_str(content: &str, origin: &str) -> Result<Vec<ImpressionLog>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Parse {
            origin: origin.to_string(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(err(format!(
                "expected 5 tab-separated columns, found {}",
                cols.len()
            )));
        }
        let history = cols[3].split_whitespace().map(str::to_string).collect();
        let candidates = cols[4]
            .split_whitespace()
            .map(|tok| {
                parse_candidate(tok)
                    .ok_or_else(|| err(format!("bad candidate {tok:?}, expected <news_id>-<0|1>")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(ImpressionLog {
            impression_id: cols[0].to_string(),
            user_id: cols[1].to_string(),
            timestamp: cols[2].to_string(),
            history,
            candidates,
        });
    }
    Ok(out)
}

pub fn parse_behaviors_tsv(path: impl AsRef<Path>) -> Result<Vec<ImpressionLog>, CorpusError> {
    let path = path.as_ref();
    parse_behaviors_str(&read_text(path)?, &path.display().to_string())
}

pub fn write_behaviors_tsv(logs: &[ImpressionLog]) -> String {
    let mut s = String::new();
    for log in logs {
        let cands: Vec<String> = log
            .candidates
            .iter()
            .map(|(id, l)| format!("{id}-{l}"))
            .collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            log.impression_id,
            log.user_id,
            log.timestamp,
            log.history.join(" "),
            cands.join(" ")
        );
    }
    s
}
