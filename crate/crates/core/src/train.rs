//! Negative-sampled NCE training with Adam, per-epoch learning-rate halving
//! and best-on-validation model selection.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::Checkpoint;
use crate::corpus::{CorpusError, ImpressionLog};
use crate::dataset::{derive_seed, NewsTable};
use crate::encoder::Dropout;
use crate::eval::{evaluate, impression_history, EvalError};
use crate::metrics::MetricReport;
use crate::model::{Model, ModelError};
use crate::numeric::{nce_value, Adam, NumericError, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Samples per mini-batch; one sample is a positive with its negatives.
    pub batch_size: usize,
    /// M
    pub negatives: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lr_halving: bool,
    /// Global gradient-norm bound; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            negatives: 4,
            dropout: 0.2,
            epochs: 10,
            seed: 42,
            lr_halving: true,
            clip_norm: 5.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err("train.learning_rate must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("train.batch_size must be at least 1".into());
        }
        if self.negatives == 0 {
            return Err("train.negatives must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err("train.dropout must lie in [0, 1)".into());
        }
        if !(self.clip_norm >= 0.0) {
            return Err("train.clip_norm must be non-negative".into());
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.lr_halving {
            self.learning_rate / 2f64.powi(epoch as i32)
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no training impressions")]
    NoImpressions,
    #[error(transparent)]
    Data(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("training diverged in epoch {epoch}: {cause}")]
    Diverged {
        epoch: usize,
        cause: NumericError,
        last_good: Box<Checkpoint>,
    },
}

/// One clicked candidate with its sampled non-clicked candidates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSample<'a> {
    pub positive: &'a str,
    pub negatives: Vec<&'a str>,
}

/// One sample per positive. Negatives are drawn without replacement when
/// the impression has at least `m`, otherwise with replacement. Returns no
/// samples when the impression has no negatives.
pub fn build_samples<'a, R: Rng + ?Sized>(
    imp: &'a ImpressionLog,
    m: usize,
    rng: &mut R,
) -> Vec<TrainingSample<'a>> {
    let negatives: Vec<&str> = imp.negatives().collect();
    if negatives.is_empty() {
        return Vec::new();
    }
    imp.positives()
        .map(|positive| {
            let picked = if negatives.len() >= m {
                negatives.choose_multiple(rng, m).copied().collect()
            } else {
                (0..m)
                    .map(|_| *negatives.choose(rng).expect("non-empty"))
                    .collect()
            };
            TrainingSample {
                positive,
                negatives: picked,
            }
        })
        .collect()
}

/// `−log(exp(s⁺) / (exp(s⁺) + Σ exp(s⁻)))`
pub fn nce_loss(positive: f64, negatives: &[f64]) -> Result<f64, NumericError> {
    if negatives.is_empty() {
        return Err(NumericError::Degenerate(
            "nce loss needs at least one negative",
        ));
    }
    let mut scores = Vec::with_capacity(negatives.len() + 1);
    scores.push(positive);
    scores.extend_from_slice(negatives);
    nce_value(&scores)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub samples: usize,
    pub validation: Option<MetricReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub config_hash: String,
    pub skipped_impressions: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl RunReport {
    /// Key-value text form, one `epoch.N.*` group per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "config_hash = {}", self.config_hash);
        let _ = writeln!(out, "skipped_impressions = {}", self.skipped_impressions);
        let _ = writeln!(out, "best_epoch = {}", self.best_epoch);
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch.{}.learning_rate = {:e}",
                e.epoch, e.learning_rate
            );
            let _ = writeln!(out, "epoch.{}.mean_loss = {:.6}", e.epoch, e.mean_loss);
            let _ = writeln!(out, "epoch.{}.samples = {}", e.epoch, e.samples);
            if let Some(v) = &e.validation {
                let names = ["auc", "mrr", "ndcg@5", "ndcg@10"];
                for (n, x) in names.iter().zip(v.values()) {
                    let _ = writeln!(out, "epoch.{}.val_{n} = {:.2}", e.epoch, 100.0 * x);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub report: RunReport,
}

struct Prepared {
    history: usize,
    candidates: Vec<usize>,
}

/// Trains `model` and returns the epoch with the best validation AUC (the
/// last epoch when there is no validation data).
pub fn train(
    model: Model,
    table: &NewsTable,
    train_set: &[ImpressionLog],
    val_set: &[ImpressionLog],
    vocab_hash: &str,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome, TrainError> {
    train_observed(model, table, train_set, val_set, vocab_hash, cfg, |_, _| {
        ControlFlow::Continue(())
    })
}

/// [`train`] with a hook called after every epoch; returning
/// `ControlFlow::Break` ends training early.
pub fn train_observed<F>(
    mut model: Model,
    table: &NewsTable,
    train_set: &[ImpressionLog],
    val_set: &[ImpressionLog],
    vocab_hash: &str,
    cfg: &TrainingConfig,
    mut observe: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochRecord, &Model) -> ControlFlow<()>,
{
    cfg.validate().map_err(TrainError::Config)?;
    if train_set.is_empty() {
        return Err(TrainError::NoImpressions);
    }
    let limit = model.config().history_limit;
    let mut adam = Adam::new(model.store());
    let mut best = Checkpoint::new(model.clone(), cfg, vocab_hash, 0, None);
    let mut best_auc = f64::NEG_INFINITY;
    let mut report = RunReport {
        seed: cfg.seed,
        config_hash: best.manifest.config_hash.clone(),
        skipped_impressions: 0,
        epochs: Vec::new(),
        best_epoch: 0,
    };

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64 + 1));
        let history_seed: u64 = rng.random();
        let mut histories = Vec::with_capacity(train_set.len());
        let mut samples = Vec::new();
        let mut skipped = 0;
        for (i, imp) in train_set.iter().enumerate() {
            let built = build_samples(imp, cfg.negatives, &mut rng);
            if built.is_empty() {
                skipped += 1;
                continue;
            }
            histories.push(impression_history(imp, table, limit, history_seed, i)?);
            for s in built {
                let mut candidates = vec![table.position(s.positive)?];
                for n in s.negatives {
                    candidates.push(table.position(n)?);
                }
                samples.push(Prepared {
                    history: histories.len() - 1,
                    candidates,
                });
            }
        }
        report.skipped_impressions = skipped;
        samples.shuffle(&mut rng);

        let diverged = |cause: NumericError, best: &Checkpoint| TrainError::Diverged {
            epoch,
            cause,
            last_good: Box::new(best.clone()),
        };
        let mut loss_sum = 0.0;
        for batch in samples.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let mut dropout = if cfg.dropout > 0.0 {
                Dropout::On {
                    rate: cfg.dropout,
                    rng: &mut rng,
                }
            } else {
                Dropout::Off
            };
            let mut losses = Vec::with_capacity(batch.len());
            for s in batch {
                let history: Vec<&[usize]> = histories[s.history]
                    .iter()
                    .map(|&p| table.tokens(p))
                    .collect();
                let candidates: Vec<&[usize]> =
                    s.candidates.iter().map(|&p| table.tokens(p)).collect();
                match model.sample_loss(
                    &mut tape,
                    &bound,
                    &history,
                    &candidates,
                    &mut dropout.reborrow(),
                ) {
                    Ok(l) => losses.push(l),
                    Err(ModelError::Numeric(e)) => return Err(diverged(e, &best)),
                    Err(e) => return Err(e.into()),
                }
            }
            let stacked = tape.stack(&losses).map_err(ModelError::from)?;
            let total = tape.sum(stacked);
            let value = tape.value(total).item();
            if !value.is_finite() {
                return Err(diverged(
                    NumericError::NonFinite("training loss".into()),
                    &best,
                ));
            }
            loss_sum += value;
            let store = model.store_mut();
            store.zero_grads();
            tape.backward(total, store).map_err(ModelError::from)?;
            if cfg.clip_norm > 0.0 {
                store.clip_grad_norm(cfg.clip_norm);
            }
            if let Err(e) = adam.step(store, lr) {
                return Err(diverged(e, &best));
            }
        }

        let validation = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&model, table, val_set, cfg.seed)?)
        };
        let auc = validation.as_ref().map_or(f64::NAN, |v| v.auc);
        report.epochs.push(EpochRecord {
            epoch: epoch + 1,
            learning_rate: lr,
            mean_loss: if samples.is_empty() {
                0.0
            } else {
                loss_sum / samples.len() as f64
            },
            samples: samples.len(),
            validation: validation.clone(),
        });
        // without a usable validation AUC the latest epoch wins
        if auc.is_nan() || auc > best_auc || report.best_epoch == 0 {
            if !auc.is_nan() {
                best_auc = auc;
            }
            best = Checkpoint::new(model.clone(), cfg, vocab_hash, epoch + 1, validation);
            report.best_epoch = epoch + 1;
        }
        if observe(report.epochs.last().expect("just pushed"), &model).is_break() {
            break;
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn impression(pos: usize, neg: usize) -> ImpressionLog {
        let mut candidates = Vec::new();
        for i in 0..pos {
            candidates.push((format!("P{i}"), 1));
        }
        for i in 0..neg {
            candidates.push((format!("N{i}"), 0));
        }
        ImpressionLog {
            impression_id: "1".into(),
            user_id: "U1".into(),
            timestamp: String::new(),
            history: vec![],
            candidates,
        }
    }

    #[test]
    fn four_distinct_negatives_when_available() {
        let imp = impression(1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = build_samples(&imp, 4, &mut rng);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].positive, "P0");
        let distinct: BTreeSet<_> = s[0].negatives.iter().collect();
        assert_eq!(distinct.len(), 4);
        assert!(s[0].negatives.iter().all(|n| n.starts_with('N')));
    }

    #[test]
    fn one_sample_per_positive() {
        let imp = impression(2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(build_samples(&imp, 4, &mut rng).len(), 2);
    }

    #[test]
    fn replacement_when_negatives_are_scarce() {
        let imp = impression(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = build_samples(&imp, 4, &mut rng);
        assert_eq!(s[0].negatives.len(), 4);
        assert!(s[0].negatives.iter().all(|n| *n == "N0" || *n == "N1"));
    }

    #[test]
    fn no_negatives_gives_no_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(build_samples(&impression(2, 0), 4, &mut rng).is_empty());
    }

    #[test]
    fn sampling_is_seeded() {
        let imp = impression(3, 9);
        let a = build_samples(&imp, 4, &mut ChaCha8Rng::seed_from_u64(5));
        let b = build_samples(&imp, 4, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn nce_examples() {
        assert!((nce_loss(0.7, &[0.7; 4]).unwrap() - 5f64.ln()).abs() < 1e-9);
        assert!(nce_loss(20.0, &[0.0, -1.0]).unwrap() < 1e-8);
        let e = std::f64::consts::E;
        let v = nce_loss(0.0, &[1.0, -1.0]).unwrap();
        assert!((v - (1.0 + e + 1.0 / e).ln()).abs() < 1e-12);
        assert!((v - 1.407_605_964_444_380_4).abs() < 1e-12);
        assert!(nce_loss(f64::NAN, &[0.0]).is_err());
    }

    #[test]
    fn learning_rate_halves_each_epoch() {
        let cfg = TrainingConfig::default();
        assert_eq!(cfg.learning_rate_at(0), 1e-3);
        assert_eq!(cfg.learning_rate_at(3), 1e-3 / 8.0);
        let flat = TrainingConfig {
            lr_halving: false,
            ..cfg
        };
        assert_eq!(flat.learning_rate_at(3), 1e-3);
    }

    #[test]
    fn config_validation() {
        let bad = TrainingConfig {
            negatives: 0,
            ..TrainingConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig {
            dropout: 1.0,
            ..TrainingConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
