//! The full recommender: news encoder, user encoder and dot-product scorer
//! over one parameter store.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocumentLayout, PAD_INDEX};
use crate::encoder::{
    encode_on_tape, xavier_uniform, AdditivePoolParams, AdditiveVars, Dropout, EncodedVars,
    NewsEncoding, TopicAttentionParams, TopicAttentionVars,
};
use crate::numeric::{NumericError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::user::{
    attention_user_on_tape, gru_user_on_tape, GruParams, GruVars, UserRepresentation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Att,
    Gru,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Att => "att",
            Variant::Gru => "gru",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "att" => Ok(Variant::Att),
            "gru" => Ok(Variant::Gru),
            other => Err(format!(
                "unknown model variant {other:?} (expected att or gru)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// K
    pub topics: usize,
    /// D_E, also the topic and document vector size.
    pub embedding_dim: usize,
    /// D_K
    pub topic_proj_dim: usize,
    /// D_I
    pub pool_proj_dim: usize,
    /// D_U
    pub user_proj_dim: usize,
    pub per_head_projection: bool,
    pub title_len: usize,
    pub body_len: usize,
    pub history_limit: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Att,
            topics: 30,
            embedding_dim: 300,
            topic_proj_dim: 64,
            pool_proj_dim: 64,
            user_proj_dim: 64,
            per_head_projection: false,
            title_len: 30,
            body_len: 70,
            history_limit: 50,
        }
    }
}

impl ModelConfig {
    pub fn layout(&self) -> DocumentLayout {
        DocumentLayout {
            title_len: self.title_len,
            body_len: self.body_len,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("model.topics", self.topics),
            ("model.embedding_dim", self.embedding_dim),
            ("model.topic_proj_dim", self.topic_proj_dim),
            ("model.pool_proj_dim", self.pool_proj_dim),
            ("model.user_proj_dim", self.user_proj_dim),
            ("model.history_limit", self.history_limit),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if self.title_len + self.body_len == 0 {
            return Err("model.title_len + model.body_len must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("incompatible parameters: {0}")]
    Incompatible(String),
    #[error("operation not supported for the {0} variant")]
    UnsupportedVariant(Variant),
}

#[derive(Clone, Debug, PartialEq)]
enum UserIds {
    Att([ParamId; 3]),
    Gru([ParamId; 10]),
}

#[derive(Clone, Debug, PartialEq)]
struct ModelIds {
    embedding: ParamId,
    topic: [ParamId; 3],
    pool: [ParamId; 3],
    user: UserIds,
}

const TOPIC_NAMES: [&str; 3] = ["topic.projection", "topic.query", "topic.bias"];
const POOL_NAMES: [&str; 3] = ["pool.projection", "pool.bias", "pool.query"];
const USER_NAMES: [&str; 3] = ["user.projection", "user.bias", "user.query"];
pub const EMBEDDING_NAME: &str = "embedding";

fn gru_name(n: &str) -> String {
    format!("gru.{n}")
}

/// Parameter handles bound to one tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundModel {
    pub topic: TopicAttentionVars,
    pub pool: AdditiveVars,
    user: BoundUser,
}

#[derive(Clone, Copy, Debug)]
enum BoundUser {
    Att(AdditiveVars),
    Gru(GruVars),
}

/// User side of a tape forward: `gamma` is present for the attentive
/// variant with a non-empty history.
#[derive(Clone, Copy, Debug)]
pub struct UserVars {
    pub vector: Var,
    pub gamma: Option<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    ids: ModelIds,
}

impl Model {
    /// Fresh model around the given `V × D_E` embedding table. Matrices and
    /// query vectors are Xavier-uniform, biases zero.
    pub fn new(config: ModelConfig, embeddings: Tensor, seed: u64) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        if embeddings.rank() != 2 || embeddings.cols() != config.embedding_dim {
            return Err(ModelError::Config(format!(
                "embedding table has shape {:?}, expected [V, {}]",
                embeddings.shape(),
                config.embedding_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (de, dk, k, di, du) = (
            config.embedding_dim,
            config.topic_proj_dim,
            config.topics,
            config.pool_proj_dim,
            config.user_proj_dim,
        );
        let width = if config.per_head_projection {
            k * dk
        } else {
            dk
        };
        let mut store = ParamStore::new();
        let mut emb = embeddings;
        emb.row_mut(PAD_INDEX).fill(0.0);
        store.insert(EMBEDDING_NAME, emb)?;
        store.insert(TOPIC_NAMES[0], xavier_uniform(&mut rng, de, width, de, dk))?;
        store.insert(TOPIC_NAMES[1], xavier_uniform(&mut rng, k, dk, dk, 1))?;
        store.insert(TOPIC_NAMES[2], Tensor::zeros(&[k, dk]))?;
        store.insert(POOL_NAMES[0], xavier_uniform(&mut rng, de, di, de, di))?;
        store.insert(POOL_NAMES[1], Tensor::zeros(&[di]))?;
        store.insert(
            POOL_NAMES[2],
            vector(xavier_uniform(&mut rng, di, 1, di, 1)),
        )?;
        match config.variant {
            Variant::Att => {
                store.insert(USER_NAMES[0], xavier_uniform(&mut rng, de, du, de, du))?;
                store.insert(USER_NAMES[1], Tensor::zeros(&[du]))?;
                store.insert(
                    USER_NAMES[2],
                    vector(xavier_uniform(&mut rng, du, 1, du, 1)),
                )?;
            }
            Variant::Gru => {
                for (i, n) in GruParams::NAMES.iter().enumerate() {
                    let t = if i < 6 {
                        xavier_uniform(&mut rng, de, de, de, de)
                    } else {
                        Tensor::zeros(&[de])
                    };
                    store.insert(gru_name(n), t)?;
                }
            }
        }
        Self::from_store(config, store)
    }

    /// Wraps a store loaded from a checkpoint, checking every shape.
    pub fn from_store(config: ModelConfig, mut store: ParamStore) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let (de, dk, k, di, du) = (
            config.embedding_dim,
            config.topic_proj_dim,
            config.topics,
            config.pool_proj_dim,
            config.user_proj_dim,
        );
        let width = if config.per_head_projection {
            k * dk
        } else {
            dk
        };
        let lookup =
            |store: &ParamStore, name: &str, shape: &[usize]| -> Result<ParamId, ModelError> {
                let id = store
                    .id(name)
                    .ok_or_else(|| ModelError::Incompatible(format!("missing parameter {name}")))?;
                let got = store.value(id).shape();
                if got != shape {
                    return Err(ModelError::Incompatible(format!(
                        "{name} has shape {got:?}, expected {shape:?}"
                    )));
                }
                Ok(id)
            };
        let embedding = store
            .id(EMBEDDING_NAME)
            .ok_or_else(|| ModelError::Incompatible("missing parameter embedding".into()))?;
        let emb_shape = store.value(embedding).shape().to_vec();
        if emb_shape.len() != 2 || emb_shape[1] != de || emb_shape[0] < 2 {
            return Err(ModelError::Incompatible(format!(
                "embedding has shape {emb_shape:?}, expected [V, {de}]"
            )));
        }
        let topic = [
            lookup(&store, TOPIC_NAMES[0], &[de, width])?,
            lookup(&store, TOPIC_NAMES[1], &[k, dk])?,
            lookup(&store, TOPIC_NAMES[2], &[k, dk])?,
        ];
        let pool = [
            lookup(&store, POOL_NAMES[0], &[de, di])?,
            lookup(&store, POOL_NAMES[1], &[di])?,
            lookup(&store, POOL_NAMES[2], &[di])?,
        ];
        let user = match config.variant {
            Variant::Att => UserIds::Att([
                lookup(&store, USER_NAMES[0], &[de, du])?,
                lookup(&store, USER_NAMES[1], &[du])?,
                lookup(&store, USER_NAMES[2], &[du])?,
            ]),
            Variant::Gru => {
                let mut ids = Vec::with_capacity(10);
                for (i, n) in GruParams::NAMES.iter().enumerate() {
                    let shape: &[usize] = if i < 6 { &[de, de] } else { &[de] };
                    ids.push(lookup(&store, &gru_name(n), shape)?);
                }
                UserIds::Gru(ids.try_into().expect("ten gru parameters"))
            }
        };
        let expected = 7 + if config.variant == Variant::Att {
            3
        } else {
            10
        };
        if store.len() != expected {
            return Err(ModelError::Incompatible(format!(
                "store holds {} parameters, expected {expected}",
                store.len()
            )));
        }
        if !store.get(embedding).frozen_rows().contains(&PAD_INDEX) {
            store.freeze_row(embedding, PAD_INDEX);
        }
        Ok(Model {
            config,
            store,
            ids: ModelIds {
                embedding,
                topic,
                pool,
                user,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings().rows()
    }

    pub fn embeddings(&self) -> &Tensor {
        self.store.value(self.ids.embedding)
    }

    pub fn topic_params(&self) -> TopicAttentionParams {
        let [p, q, b] = self.ids.topic.map(|id| self.store.value(id).clone());
        TopicAttentionParams {
            projection: p,
            query: q,
            bias: b,
            per_head: self.config.per_head_projection,
        }
    }

    pub fn pool_params(&self) -> AdditivePoolParams {
        let [projection, bias, query] = self.ids.pool.map(|id| self.store.value(id).clone());
        AdditivePoolParams {
            projection,
            bias,
            query,
        }
    }

    pub fn user_attention_params(&self) -> Option<AdditivePoolParams> {
        match self.ids.user {
            UserIds::Att(ids) => {
                let [projection, bias, query] = ids.map(|id| self.store.value(id).clone());
                Some(AdditivePoolParams {
                    projection,
                    bias,
                    query,
                })
            }
            UserIds::Gru(_) => None,
        }
    }

    pub fn gru_params(&self) -> Option<GruParams> {
        match self.ids.user {
            UserIds::Gru(ids) => Some(GruParams::from_tensors(
                ids.map(|id| self.store.value(id).clone()),
            )),
            UserIds::Att(_) => None,
        }
    }

    /// Places every non-embedding parameter on the tape. Embedding rows are
    /// gathered per document.
    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        let s = &self.store;
        let [tp, tq, tb] = self.ids.topic.map(|id| tape.param(s, id));
        let [pp, pb, pq] = self.ids.pool.map(|id| tape.param(s, id));
        let user = match self.ids.user {
            UserIds::Att(ids) => {
                let [projection, bias, query] = ids.map(|id| tape.param(s, id));
                BoundUser::Att(AdditiveVars {
                    projection,
                    bias,
                    query,
                })
            }
            UserIds::Gru(ids) => BoundUser::Gru(GruVars(ids.map(|id| tape.param(s, id)))),
        };
        BoundModel {
            topic: TopicAttentionVars {
                projection: tp,
                query: tq,
                bias: tb,
                per_head: self.config.per_head_projection,
            },
            pool: AdditiveVars {
                projection: pp,
                bias: pb,
                query: pq,
            },
            user,
        }
    }

    /// Encodes the real tokens of one document.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        tokens: &[usize],
        dropout: &mut Dropout<'_>,
    ) -> Result<EncodedVars, ModelError> {
        let words = tape.gather(&self.store, self.ids.embedding, tokens)?;
        let mask = vec![true; tokens.len()];
        Ok(encode_on_tape(
            tape,
            words,
            &mask,
            &bound.topic,
            &bound.pool,
            dropout,
        )?)
    }

    /// User vector from encoded history documents, oldest first. An empty
    /// history yields the zero vector.
    pub fn user_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        docs: &[Var],
    ) -> Result<UserVars, ModelError> {
        if docs.is_empty() {
            let vector = tape.input(Tensor::zeros(&[self.config.embedding_dim]));
            return Ok(UserVars {
                vector,
                gamma: None,
            });
        }
        match &bound.user {
            BoundUser::Att(vars) => {
                let rows = tape.stack(docs)?;
                let (gamma, vector) = attention_user_on_tape(tape, rows, vars)?;
                Ok(UserVars {
                    vector,
                    gamma: Some(gamma),
                })
            }
            BoundUser::Gru(vars) => {
                let o0 = tape.input(Tensor::zeros(&[self.config.embedding_dim]));
                let vector = gru_user_on_tape(tape, docs, o0, vars)?;
                Ok(UserVars {
                    vector,
                    gamma: None,
                })
            }
        }
    }

    /// Scores `candidates` against `user`: one `uᵀd` per candidate.
    pub fn scores_on_tape(
        &self,
        tape: &mut Tape,
        user: Var,
        candidates: &[Var],
    ) -> Result<Var, ModelError> {
        let rows = tape.stack(candidates)?;
        Ok(tape.matvec(rows, user)?)
    }

    /// NCE loss of one training sample; `candidates[0]` is the clicked item.
    pub fn sample_loss(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        history: &[&[usize]],
        candidates: &[&[usize]],
        dropout: &mut Dropout<'_>,
    ) -> Result<Var, ModelError> {
        let mut docs = Vec::with_capacity(history.len());
        for h in history {
            docs.push(
                self.encode_on_tape(tape, bound, h, &mut dropout.reborrow())?
                    .doc_vector,
            );
        }
        let user = self.user_on_tape(tape, bound, &docs)?;
        let mut cands = Vec::with_capacity(candidates.len());
        for c in candidates {
            cands.push(
                self.encode_on_tape(tape, bound, c, &mut dropout.reborrow())?
                    .doc_vector,
            );
        }
        let scores = self.scores_on_tape(tape, user.vector, &cands)?;
        Ok(tape.nce(scores)?)
    }

    /// Evaluation-mode encoding of one document's real tokens.
    pub fn encode(&self, tokens: &[usize]) -> Result<NewsEncoding, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let enc = self.encode_on_tape(&mut tape, &bound, tokens, &mut Dropout::Off)?;
        Ok(enc.read(&tape, tokens.len()))
    }

    pub fn doc_vector(&self, tokens: &[usize]) -> Result<Vec<f64>, ModelError> {
        Ok(self.encode(tokens)?.doc_vector)
    }

    /// Evaluation-mode user representation from history document vectors.
    /// Cold users get the zero vector and an empty `gamma`.
    pub fn user(&self, history: &[Vec<f64>]) -> Result<UserRepresentation, ModelError> {
        if history.is_empty() {
            return Ok(UserRepresentation {
                vector: vec![0.0; self.config.embedding_dim],
                gamma: Vec::new(),
            });
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let docs: Vec<Var> = history
            .iter()
            .map(|d| tape.input(Tensor::vector(d.clone())))
            .collect();
        let u = self.user_on_tape(&mut tape, &bound, &docs)?;
        Ok(UserRepresentation {
            vector: tape.value(u.vector).data().to_vec(),
            gamma: u
                .gamma
                .map(|g| tape.value(g).data().to_vec())
                .unwrap_or_default(),
        })
    }
}

fn vector(t: Tensor) -> Tensor {
    Tensor::vector(t.into_data())
}

/// `s = uᵀd`
pub fn score(user: &[f64], doc: &[f64]) -> Result<f64, ModelError> {
    if user.len() != doc.len() {
        return Err(NumericError::Shape {
            op: "score",
            left: vec![user.len()],
            right: vec![doc.len()],
        }
        .into());
    }
    Ok(user.iter().zip(doc).map(|(a, b)| a * b).sum())
}
