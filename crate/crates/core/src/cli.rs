//! The `topicrec` command line: data synthesis, training, evaluation,
//! topic extraction, coherence scoring and explanation rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{
    attach_bodies, document_token_sets, generate_synthetic_dataset, load_pretrained_embeddings,
    parse_behaviors_tsv, parse_news_tsv, preprocess_for_topics, CorpusError, EmbeddingMatrix,
    ImpressionLog, NewsArticle, StopwordList, Vocabulary,
};
use crate::dataset::{derive_seed, training_vocabulary, NewsTable};
use crate::eval::{evaluate, EvalError};
use crate::metrics::{MetricError, MetricReport};
use crate::model::{Model, ModelError, Variant};
use crate::topics::{
    coherence_summary, compute_global_topics, count_cooccurrence, extract_descriptors,
    generate_explanation, npmi_coherence, render_report, w2v_coherence, CoherenceSummary,
    ReportFormat, TopicDescriptorSet, TopicError,
};
use crate::train::{train, TrainError};

const EMBEDDING_STREAM: u64 = 0xE1;
const INIT_STREAM: u64 = 0x1A;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Compatibility,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
            ErrorKind::Compatibility => 5,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
            ErrorKind::Compatibility => "compatibility",
        }
    }
}

#[derive(Debug, Error)]
#[error("{} error: {message}", kind.label())]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl ToString) -> Self {
        CliError {
            kind,
            message: message.to_string(),
        }
    }

    fn config(message: impl ToString) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    fn data(message: impl ToString) -> Self {
        Self::new(ErrorKind::Data, message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::config(e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::data(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::Numeric(_) => ErrorKind::Numeric,
            ModelError::Config(_) => ErrorKind::Config,
            ModelError::Incompatible(_) | ModelError::UnsupportedVariant(_) => {
                ErrorKind::Compatibility
            }
        };
        CliError::new(kind, e)
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Model(m) => m.into(),
            CheckpointError::VocabularyMismatch { .. } => {
                CliError::new(ErrorKind::Compatibility, e)
            }
            CheckpointError::Io { .. } | CheckpointError::Format(_) => CliError::data(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Data(d) => d.into(),
            EvalError::Model(m) => m.into(),
            EvalError::Metric(MetricError::NonFinite) => CliError::new(ErrorKind::Numeric, e),
            EvalError::Metric(_) => CliError::data(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::config(m),
            TrainError::NoImpressions => CliError::data(e),
            TrainError::Data(d) => d.into(),
            TrainError::Model(m) => m.into(),
            TrainError::Eval(v) => v.into(),
            TrainError::Diverged { .. } => CliError::new(ErrorKind::Numeric, e),
        }
    }
}

impl From<TopicError> for CliError {
    fn from(e: TopicError) -> Self {
        match e {
            TopicError::Model(m) => m.into(),
            TopicError::Data(d) => d.into(),
            TopicError::Numeric(_) => CliError::new(ErrorKind::Numeric, e),
            TopicError::UnsupportedVariant(_) => CliError::new(ErrorKind::Compatibility, e),
            TopicError::UnknownFormat(_) => CliError::config(e),
            TopicError::Degenerate(_) => CliError::data(e),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "topicrec",
    version,
    about = "Topic-centric explainable news recommendation"
)]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set model.topics=5
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and keep the best checkpoint on validation AUC
    Train,
    /// Score a split with a checkpoint and print AUC, MRR, nDCG@5, nDCG@10
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Vocabulary file; defaults to vocab.txt next to the checkpoint
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Write the top-M descriptors of every topic
    Topics {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score topic descriptors with NPMI and W2V, with and without post-processing
    Coherence {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write one-score-per-line files for box plots
        #[arg(long)]
        boxplot: bool,
    },
    /// Render topic-highlighted explanations for impressions of a split
    Explain {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Impression ids to explain; the first `--limit` impressions when absent
        #[arg(long = "impression")]
        impressions: Vec<String>,
        #[arg(long, default_value_t = 5)]
        limit: usize,
        /// ansi, html or tsv; overrides explain.format
        #[arg(long)]
        format: Option<String>,
    },
    /// Generate a planted-topic dataset in MIND format plus a matching config
    SynthData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Topics { .. } => "topics",
            Command::Coherence { .. } => "coherence",
            Command::Explain { .. } => "explain",
            Command::SynthData { .. } => "synth-data",
        }
    }
}

/// Parses arguments, runs one subcommand and returns the exit code.
/// Results go to stdout, a single diagnostic line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ErrorKind::Config.exit_code()
            } else {
                0
            };
        }
    };
    let name = cli.command.name();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("topicrec {name}: {e}");
            e.kind.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Evaluate {
            checkpoint,
            split,
            vocab,
        } => cmd_evaluate(&cfg, checkpoint.as_deref(), *split, vocab.as_deref()),
        Command::Topics { checkpoint } => cmd_topics(&cfg, checkpoint.as_deref()),
        Command::Coherence {
            checkpoint,
            boxplot,
        } => cmd_coherence(&cfg, checkpoint.as_deref(), *boxplot),
        Command::Explain {
            checkpoint,
            split,
            impressions,
            limit,
            format,
        } => cmd_explain(
            &cfg,
            checkpoint.as_deref(),
            *split,
            impressions,
            *limit,
            format.as_deref(),
        ),
        Command::SynthData { out } => cmd_synth(&cfg, out),
    })
}

/// Fixed output layout under `paths.output`.
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(cfg: &RunConfig) -> Self {
        OutputLayout {
            root: cfg.paths.output.clone(),
        }
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn topics(&self) -> PathBuf {
        self.root.join("topics")
    }

    pub fn explanations(&self) -> PathBuf {
        self.root.join("explanations")
    }

    pub fn best_checkpoint(&self) -> PathBuf {
        self.checkpoints().join("best.ckpt")
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    seed: u64,
    threads: usize,
    config_hash: String,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Records seed, config hash and input hashes in `reports/manifest_<command>.json`.
fn write_manifest(
    cfg: &RunConfig,
    command: &str,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command,
        seed: cfg.seed,
        threads: cfg.threads,
        config_hash: cfg.hash(),
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(InputRecord {
                    path: p.display().to_string(),
                    sha256: file_sha256(p)?,
                })
            })
            .collect::<Result<_, CliError>>()?,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = OutputLayout::new(cfg)
        .reports()
        .join(format!("manifest_{command}.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, json + "\n")
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::config(format!("paths.{key} is not set")))
}

fn load_news(cfg: &RunConfig, inputs: &mut Vec<PathBuf>) -> Result<Vec<NewsArticle>, CliError> {
    let path = required(&cfg.paths.news, "news")?;
    let mut news = parse_news_tsv(path)?;
    inputs.push(path.to_path_buf());
    if let Some(bodies) = &cfg.paths.bodies {
        attach_bodies(&mut news, bodies)?;
        inputs.push(bodies.clone());
    }
    Ok(news)
}

fn split_path(cfg: &RunConfig, split: Split) -> &Option<PathBuf> {
    match split {
        Split::Train => &cfg.paths.train,
        Split::Valid => &cfg.paths.valid,
        Split::Test => &cfg.paths.test,
    }
}

fn load_split(
    cfg: &RunConfig,
    split: Split,
    inputs: &mut Vec<PathBuf>,
) -> Result<Vec<ImpressionLog>, CliError> {
    let path = required(split_path(cfg, split), split.name())?;
    let logs = parse_behaviors_tsv(path)?;
    inputs.push(path.to_path_buf());
    Ok(logs)
}

fn stopwords(cfg: &RunConfig, inputs: &mut Vec<PathBuf>) -> Result<StopwordList, CliError> {
    match &cfg.paths.stopwords {
        Some(p) => {
            inputs.push(p.clone());
            Ok(StopwordList::from_file(p)?)
        }
        None => Ok(StopwordList::english()),
    }
}

fn vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_file_name("vocab.txt")
}

struct Loaded {
    checkpoint: Checkpoint,
    vocab: Vocabulary,
}

fn load_checkpoint(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    vocab: Option<&Path>,
    inputs: &mut Vec<PathBuf>,
) -> Result<Loaded, CliError> {
    let path = checkpoint.map_or_else(
        || OutputLayout::new(cfg).best_checkpoint(),
        Path::to_path_buf,
    );
    let ck = Checkpoint::load(&path)?;
    let vpath = vocab.map_or_else(|| vocab_path(&path), Path::to_path_buf);
    let vocab = Vocabulary::load(&vpath)?;
    ck.check_vocabulary(&vocab)?;
    inputs.push(path);
    inputs.push(vpath);
    Ok(Loaded {
        checkpoint: ck,
        vocab,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<String, CliError> {
    let mut inputs = Vec::new();
    let news = load_news(cfg, &mut inputs)?;
    let train_set = load_split(cfg, Split::Train, &mut inputs)?;
    let val_set = match cfg.paths.valid {
        Some(_) => load_split(cfg, Split::Valid, &mut inputs)?,
        None => Vec::new(),
    };
    let layout = cfg.model.layout();
    let vocab = training_vocabulary(&news, &train_set, layout, cfg.min_word_freq);
    let table = NewsTable::build(&news, &vocab, layout)?;
    let emb_seed = derive_seed(cfg.seed, EMBEDDING_STREAM);
    let embeddings = match &cfg.paths.embeddings {
        Some(p) => {
            inputs.push(p.clone());
            load_pretrained_embeddings(p, &vocab, cfg.model.embedding_dim, emb_seed)?
        }
        None => EmbeddingMatrix::random(vocab.len(), cfg.model.embedding_dim, emb_seed),
    };
    let model = Model::new(
        cfg.model.clone(),
        embeddings.into_tensor(),
        derive_seed(cfg.seed, INIT_STREAM),
    )?;

    let out = OutputLayout::new(cfg);
    let vocab_file = out.checkpoints().join("vocab.txt");
    write_file(&vocab_file, vocab.to_text())?;
    let outcome = match train(
        model,
        &table,
        &train_set,
        &val_set,
        &vocab.hash(),
        &cfg.training,
    ) {
        Ok(o) => o,
        Err(TrainError::Diverged {
            epoch,
            cause,
            last_good,
        }) => {
            let path = out.checkpoints().join("last_good.ckpt");
            last_good.save(&path)?;
            return Err(CliError::new(
                ErrorKind::Numeric,
                format!(
                    "training diverged in epoch {epoch}: {cause}; last good checkpoint saved to {}",
                    path.display()
                ),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let ckpt = out.best_checkpoint();
    outcome.checkpoint.save(&ckpt)?;
    let report_file = out.reports().join("train_report.txt");
    let report = outcome.report.to_text();
    write_file(&report_file, &report)?;
    let mut outputs = vec![ckpt.clone(), vocab_file, report_file];
    if let Some(v) = &outcome.checkpoint.manifest.validation {
        let p = out.reports().join("validation.tsv");
        write_file(
            &p,
            format!("{}\n{}\n", MetricReport::TSV_HEADER, v.tsv_row()),
        )?;
        outputs.push(p);
    }
    write_manifest(cfg, "train", &inputs, &outputs)?;
    let mut s = report;
    let _ = writeln!(s, "checkpoint = {}", ckpt.display());
    if table.empty_documents > 0 {
        let _ = writeln!(s, "empty_documents = {}", table.empty_documents);
    }
    Ok(s)
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    split: Split,
    vocab: Option<&Path>,
) -> Result<String, CliError> {
    let mut inputs = Vec::new();
    let loaded = load_checkpoint(cfg, checkpoint, vocab, &mut inputs)?;
    let news = load_news(cfg, &mut inputs)?;
    let logs = load_split(cfg, split, &mut inputs)?;
    let model = &loaded.checkpoint.model;
    let table = NewsTable::build(&news, &loaded.vocab, model.config().layout())?;
    let report = evaluate(model, &table, &logs, cfg.seed)?;
    let out = OutputLayout::new(cfg);
    let row = format!("{}\n{}\n", MetricReport::TSV_HEADER, report.tsv_row());
    let tsv = out.reports().join(format!("metrics_{}.tsv", split.name()));
    let txt = out.reports().join(format!("metrics_{}.txt", split.name()));
    write_file(&tsv, &row)?;
    write_file(&txt, report.to_text())?;
    write_manifest(cfg, "evaluate", &inputs, &[tsv, txt])?;
    Ok(row)
}

/// Labeled descriptor sets: all vocabulary words, then the post-processed
/// words (`PP-N`, N = minimum document frequency).
fn descriptor_variants(
    cfg: &RunConfig,
    loaded: &Loaded,
    news: &[NewsArticle],
    stop: &StopwordList,
) -> Result<Vec<(String, TopicDescriptorSet)>, CliError> {
    let model = &loaded.checkpoint.model;
    let all: BTreeSet<usize> = loaded.vocab.word_indices().collect();
    let global = compute_global_topics(&model.topic_params(), model.embeddings(), &all)?;
    let pp = preprocess_for_topics(
        news,
        &loaded.vocab,
        stop,
        cfg.coherence.min_df,
        cfg.coherence.max_df_frac,
    )?;
    if pp.len() < 2 {
        return Err(CliError::data(format!(
            "post-processing with min_df {} and max_df_frac {} leaves {} tokens",
            cfg.coherence.min_df,
            cfg.coherence.max_df_frac,
            pp.len()
        )));
    }
    let m = cfg.coherence.descriptors;
    Ok(vec![
        (
            "Without-PP".to_string(),
            extract_descriptors(&global, m, None)?,
        ),
        (
            format!("PP-{}", cfg.coherence.min_df),
            extract_descriptors(&global, m, Some(&pp))?,
        ),
    ])
}

fn file_label(label: &str) -> String {
    label.to_ascii_lowercase().replace('-', "_")
}

pub fn cmd_topics(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<String, CliError> {
    let mut inputs = Vec::new();
    let loaded = load_checkpoint(cfg, checkpoint, None, &mut inputs)?;
    let news = load_news(cfg, &mut inputs)?;
    let stop = stopwords(cfg, &mut inputs)?;
    let out = OutputLayout::new(cfg);
    let mut outputs = Vec::new();
    let mut summary = String::new();
    for (label, set) in descriptor_variants(cfg, &loaded, &news, &stop)? {
        let mut tsv = String::from("topic_id");
        for i in 1..=cfg.coherence.descriptors {
            let _ = write!(tsv, "\tdescriptor_{i}");
        }
        tsv.push('\n');
        let _ = writeln!(summary, "[{label}]");
        for k in 0..set.topics.len() {
            let words = set.words(k, &loaded.vocab);
            let _ = writeln!(tsv, "{k}\t{}", words.join("\t"));
            let _ = writeln!(summary, "topic {k}: {}", words.join(" "));
        }
        if set.short {
            let _ = writeln!(
                summary,
                "(fewer than {} tokens available)",
                cfg.coherence.descriptors
            );
        }
        let path = out
            .topics()
            .join(format!("descriptors_{}.tsv", file_label(&label)));
        write_file(&path, tsv)?;
        outputs.push(path);
    }
    write_manifest(cfg, "topics", &inputs, &outputs)?;
    Ok(summary)
}

fn summary_block(out: &mut String, label: &str, metric: &str, s: &CoherenceSummary, fraction: f64) {
    let _ = writeln!(out, "{label}.{metric}.mean = {:.4}", s.mean);
    let _ = writeln!(
        out,
        "{label}.{metric}.top_{}pct_mean = {:.4} ({} topics)",
        (fraction * 100.0).round(),
        s.top_mean,
        s.top_count
    );
}

pub fn cmd_coherence(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    boxplot: bool,
) -> Result<String, CliError> {
    let mut inputs = Vec::new();
    let loaded = load_checkpoint(cfg, checkpoint, None, &mut inputs)?;
    let news = load_news(cfg, &mut inputs)?;
    let stop = stopwords(cfg, &mut inputs)?;
    let counts = count_cooccurrence(&document_token_sets(&news, &loaded.vocab), None);
    let embeddings = loaded.checkpoint.model.embeddings();
    let c = &cfg.coherence;
    let out = OutputLayout::new(cfg);
    let mut outputs = Vec::new();
    let mut summary = String::new();
    for (label, set) in descriptor_variants(cfg, &loaded, &news, &stop)? {
        let npmi = npmi_coherence(&set, &counts, c.epsilon)?;
        let w2v = w2v_coherence(&set, embeddings)?;
        let mut tsv = String::from("topic_id\tnpmi\tw2v");
        for i in 1..=c.descriptors {
            let _ = write!(tsv, "\tdescriptor_{i}");
        }
        tsv.push('\n');
        for k in 0..set.topics.len() {
            let _ = writeln!(
                tsv,
                "{k}\t{:.6}\t{:.6}\t{}",
                npmi.per_topic[k],
                w2v.per_topic[k],
                set.words(k, &loaded.vocab).join("\t")
            );
        }
        let name = file_label(&label);
        let path = out.topics().join(format!("coherence_{name}.tsv"));
        write_file(&path, tsv)?;
        outputs.push(path);
        let _ = writeln!(summary, "[{label}]");
        summary_block(
            &mut summary,
            &label,
            "npmi",
            &coherence_summary(&npmi.per_topic, c.top_fraction)?,
            c.top_fraction,
        );
        summary_block(
            &mut summary,
            &label,
            "w2v",
            &coherence_summary(&w2v.per_topic, c.top_fraction)?,
            c.top_fraction,
        );
        if w2v.skipped_pairs > 0 {
            let _ = writeln!(summary, "{label}.w2v.skipped_pairs = {}", w2v.skipped_pairs);
        }
        if boxplot {
            for (metric, scores) in [("npmi", &npmi.per_topic), ("w2v", &w2v.per_topic)] {
                let p = out.topics().join(format!("boxplot_{name}_{metric}.txt"));
                let lines: String = scores.iter().map(|x| format!("{x}\n")).collect();
                write_file(&p, lines)?;
                outputs.push(p);
            }
        }
    }
    let path = out.topics().join("coherence_summary.txt");
    write_file(&path, &summary)?;
    outputs.push(path);
    write_manifest(cfg, "coherence", &inputs, &outputs)?;
    Ok(summary)
}

fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_explain(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    split: Split,
    impression_ids: &[String],
    limit: usize,
    format: Option<&str>,
) -> Result<String, CliError> {
    let format: ReportFormat = format.unwrap_or(&cfg.explain.format).parse()?;
    let mut inputs = Vec::new();
    let loaded = load_checkpoint(cfg, checkpoint, None, &mut inputs)?;
    let model = &loaded.checkpoint.model;
    if model.config().variant != Variant::Att {
        return Err(TopicError::UnsupportedVariant(model.config().variant).into());
    }
    let news = load_news(cfg, &mut inputs)?;
    let logs = load_split(cfg, split, &mut inputs)?;
    let selected: Vec<usize> = if impression_ids.is_empty() {
        (0..logs.len().min(limit)).collect()
    } else {
        impression_ids
            .iter()
            .map(|id| {
                logs.iter()
                    .position(|l| &l.impression_id == id)
                    .ok_or_else(|| {
                        CliError::data(format!(
                            "impression {id} not found in the {} split",
                            split.name()
                        ))
                    })
            })
            .collect::<Result<_, _>>()?
    };
    let allowed: BTreeSet<usize> = if cfg.explain.postprocess {
        let stop = stopwords(cfg, &mut inputs)?;
        preprocess_for_topics(
            &news,
            &loaded.vocab,
            &stop,
            cfg.coherence.min_df,
            cfg.coherence.max_df_frac,
        )?
    } else {
        loaded.vocab.word_indices().collect()
    };
    let table = NewsTable::build(&news, &loaded.vocab, model.config().layout())?;
    let global = compute_global_topics(&model.topic_params(), model.embeddings(), &allowed)?;
    let out = OutputLayout::new(cfg);
    let mut outputs = Vec::new();
    for &i in &selected {
        let report = generate_explanation(
            model,
            &table,
            &logs[i],
            i,
            &global,
            cfg.explain.top_articles,
            cfg.explain.top_topics,
            cfg.seed,
        )?;
        let path = out.explanations().join(format!(
            "impression_{}.{}",
            safe_file_stem(&logs[i].impression_id),
            format.extension()
        ));
        write_file(&path, render_report(&report, format))?;
        outputs.push(path);
    }
    write_manifest(cfg, "explain", &inputs, &outputs)?;
    Ok(outputs
        .iter()
        .map(|p| format!("{}\n", p.display()))
        .collect())
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let data = generate_synthetic_dataset(&cfg.synth.to_synth_config(cfg.seed));
    data.write_to(out).map_err(|e| io_error(out, e))?;
    let config = format!(
        "seed = {seed}\n\
         paths.news = \"news.tsv\"\n\
         paths.train = \"train/behaviors.tsv\"\n\
         paths.valid = \"valid/behaviors.tsv\"\n\
         paths.test = \"test/behaviors.tsv\"\n\
         paths.embeddings = \"embeddings.txt\"\n\
         paths.output = \"run\"\n\
         model.topics = 5\n\
         model.embedding_dim = {dim}\n\
         model.topic_proj_dim = 16\n\
         model.pool_proj_dim = 16\n\
         model.user_proj_dim = 16\n\
         training.epochs = 5\n",
        seed = cfg.seed,
        dim = cfg.synth.embedding_dim
    );
    write_file(&out.join("config.toml"), config)?;
    Ok(format!(
        "{} news, {} train / {} valid / {} test impressions written to {}\n",
        data.news.len(),
        data.train.len(),
        data.val.len(),
        data.test.len(),
        out.display()
    ))
}
