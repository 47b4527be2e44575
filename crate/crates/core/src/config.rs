//! Run configuration: a TOML file with dotted keys plus `key=value`
//! overrides, validated before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::SynthConfig;
use crate::model::ModelConfig;
use crate::train::TrainingConfig;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Input and output locations. Relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub news: Option<PathBuf>,
    /// `[news_id, body]` sidecar TSV.
    pub bodies: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// GloVe-style text vectors; random initialization when absent.
    pub embeddings: Option<PathBuf>,
    /// One stopword per line; a built-in English list when absent.
    pub stopwords: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            news: None,
            bodies: None,
            train: None,
            valid: None,
            test: None,
            embeddings: None,
            stopwords: None,
            output: PathBuf::from("run"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    /// Descriptors per topic.
    pub descriptors: usize,
    pub min_df: usize,
    pub max_df_frac: f64,
    pub epsilon: f64,
    pub top_fraction: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            descriptors: 10,
            min_df: 10,
            max_df_frac: 0.9,
            epsilon: 1e-12,
            top_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub top_articles: usize,
    pub top_topics: usize,
    /// Highlight only tokens that survive topic post-processing.
    pub postprocess: bool,
    pub format: String,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            top_articles: 3,
            top_topics: 3,
            postprocess: true,
            format: "html".into(),
        }
    }
}

/// Size of the generated planted-topic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub topics: usize,
    pub keywords_per_topic: usize,
    pub noise_words: usize,
    pub news: usize,
    pub users: usize,
    pub history_len: usize,
    pub candidates: usize,
    pub embedding_dim: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthSection {
            topics: d.topics,
            keywords_per_topic: d.keywords_per_topic,
            noise_words: d.noise_words,
            news: d.news,
            users: d.users,
            history_len: d.history_len,
            candidates: d.candidates,
            embedding_dim: d.embedding_dim,
        }
    }
}

impl SynthSection {
    pub fn to_synth_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            topics: self.topics,
            keywords_per_topic: self.keywords_per_topic,
            noise_words: self.noise_words,
            news: self.news,
            users: self.users,
            history_len: self.history_len,
            candidates: self.candidates,
            embedding_dim: self.embedding_dim,
            seed,
            ..SynthConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Source of all randomness.
    pub seed: u64,
    pub threads: usize,
    pub min_word_freq: usize,
    pub paths: PathsConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub coherence: CoherenceConfig,
    pub explain: ExplainConfig,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threads: 1,
            min_word_freq: 1,
            paths: PathsConfig::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            coherence: CoherenceConfig::default(),
            explain: ExplainConfig::default(),
            synth: SynthSection::default(),
        }
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(format!("bad override key {key:?}")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            ConfigError(format!(
                "override key {key:?} descends into a non-table value"
            ))
        })?;
    }
    node.insert(
        parts[parts.len() - 1].to_string(),
        parse_override_value(raw.trim()),
    );
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides, fills defaults and validates.
    /// Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| ConfigError(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if table.get("training").and_then(|t| t.get("seed")).is_some() {
            return Err(ConfigError(
                "training.seed is not a key; set the top-level seed".into(),
            ));
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;
        cfg.training.seed = cfg.seed;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                Self::from_toml(&text, overrides, base)
            }
            None => Self::from_toml("", overrides, Path::new("")),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.news,
            &mut paths.bodies,
            &mut paths.train,
            &mut paths.valid,
            &mut paths.test,
            &mut paths.embeddings,
            &mut paths.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut paths.output);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(ConfigError)?;
        self.training.validate().map_err(ConfigError)?;
        if self.threads == 0 {
            return Err(ConfigError("threads must be at least 1".into()));
        }
        if self.min_word_freq == 0 {
            return Err(ConfigError("min_word_freq must be at least 1".into()));
        }
        let c = &self.coherence;
        if c.descriptors < 2 {
            return Err(ConfigError(
                "coherence.descriptors must be at least 2".into(),
            ));
        }
        if !(c.max_df_frac > 0.0 && c.max_df_frac <= 1.0) {
            return Err(ConfigError(
                "coherence.max_df_frac must lie in (0, 1]".into(),
            ));
        }
        if !(c.epsilon > 0.0) {
            return Err(ConfigError("coherence.epsilon must be positive".into()));
        }
        if !(c.top_fraction > 0.0 && c.top_fraction <= 1.0) {
            return Err(ConfigError(
                "coherence.top_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.explain.top_topics == 0 {
            return Err(ConfigError("explain.top_topics must be at least 1".into()));
        }
        if !["ansi", "html", "tsv"].contains(&self.explain.format.as_str()) {
            return Err(ConfigError(format!(
                "explain.format must be ansi, html or tsv, got {:?}",
                self.explain.format
            )));
        }
        let s = &self.synth;
        if s.topics < 2
            || s.news == 0
            || s.users == 0
            || s.candidates < 2
            || s.keywords_per_topic == 0
        {
            return Err(ConfigError(
                "synth needs at least 2 topics and 2 candidates and nonzero news, users and keywords".into(),
            ));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
