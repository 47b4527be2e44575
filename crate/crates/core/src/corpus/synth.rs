//! Planted-topic synthetic MIND datasets.
//!
//! Every article is drawn from one planted topic: its text mixes that
//! topic's keywords with shared noise words and stopwords. Every user
//! prefers one topic, keeps a history dominated by it, and clicks
//! candidates of that topic far more often than others. A matching
//! GloVe-style vector file places each topic's keywords around a common
//! center, the way pretrained vectors cluster related words.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    write_behaviors_tsv, write_embeddings_text, write_news_tsv, ImpressionLog, NewsArticle,
    StopwordList,
};

const THEMES: &[(&str, [&str; 15])] = &[
    (
        "food",
        [
            "seafood",
            "salmon",
            "shrimp",
            "lobster",
            "oysters",
            "pasta",
            "appetizer",
            "mussels",
            "entree",
            "chef",
            "menu",
            "restaurant",
            "dessert",
            "grill",
            "kitchen",
        ],
    ),
    (
        "sports",
        [
            "soccer",
            "football",
            "striker",
            "goalkeeper",
            "league",
            "coach",
            "playoff",
            "stadium",
            "referee",
            "tournament",
            "midfielder",
            "champion",
            "season",
            "scored",
            "athlete",
        ],
    ),
    (
        "finance",
        [
            "mortgage",
            "lender",
            "loan",
            "interest",
            "inflation",
            "bank",
            "equity",
            "borrower",
            "monetary",
            "federal",
            "bonds",
            "stocks",
            "investor",
            "dividend",
            "market",
        ],
    ),
    (
        "pets",
        [
            "dog",
            "cat",
            "terrier",
            "puppy",
            "kennel",
            "retriever",
            "kitten",
            "veterinarian",
            "leash",
            "breed",
            "canine",
            "shelter",
            "adoption",
            "groomer",
            "paws",
        ],
    ),
    (
        "music",
        [
            "song",
            "album",
            "guitar",
            "piano",
            "concert",
            "soundtrack",
            "singer",
            "drummer",
            "melody",
            "chorus",
            "band",
            "studio",
            "lyrics",
            "vinyl",
            "tour",
        ],
    ),
    (
        "education",
        [
            "university",
            "students",
            "faculty",
            "admissions",
            "campus",
            "graduate",
            "undergraduate",
            "tuition",
            "professor",
            "scholarship",
            "lecture",
            "semester",
            "degree",
            "college",
            "enrollment",
        ],
    ),
    (
        "weather",
        [
            "storm",
            "hurricane",
            "rainfall",
            "forecast",
            "tornado",
            "flood",
            "snowfall",
            "temperature",
            "humidity",
            "drought",
            "thunder",
            "blizzard",
            "meteorologist",
            "wind",
            "climate",
        ],
    ),
    (
        "health",
        [
            "vaccine",
            "hospital",
            "doctor",
            "patients",
            "clinic",
            "surgery",
            "nurse",
            "symptoms",
            "therapy",
            "diagnosis",
            "virus",
            "medicine",
            "cardiology",
            "fitness",
            "nutrition",
        ],
    ),
];

const NOISE: &[&str] = &[
    "report",
    "update",
    "week",
    "officials",
    "statement",
    "video",
    "photos",
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "local",
    "county",
    "city",
    "state",
    "national",
    "latest",
    "news",
    "story",
    "announced",
    "plan",
    "group",
    "family",
    "home",
    "life",
    "world",
    "big",
    "best",
    "things",
    "times",
    "days",
    "area",
    "company",
    "public",
    "million",
    "percent",
    "year",
    "people",
    "official",
];

const FILLER_STOPWORDS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "for", "on", "with", "is",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub topics: usize,
    pub keywords_per_topic: usize,
    pub noise_words: usize,
    pub news: usize,
    pub users: usize,
    pub history_len: usize,
    pub candidates: usize,
    pub train_impressions_per_user: usize,
    pub val_impressions_per_user: usize,
    pub test_impressions_per_user: usize,
    pub title_keywords: usize,
    pub title_noise: usize,
    pub body_keywords: usize,
    pub body_noise: usize,
    pub stopwords_per_doc: usize,
    /// Share of history items taken from the user's preferred topic.
    pub history_focus: f64,
    pub click_on_topic: f64,
    pub click_off_topic: f64,
    pub embedding_dim: usize,
    /// Distance of a keyword vector from its topic center, relative to the
    /// center's norm.
    pub keyword_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: 3,
            keywords_per_topic: 15,
            noise_words: 40,
            news: 200,
            users: 50,
            history_len: 10,
            candidates: 10,
            train_impressions_per_user: 4,
            val_impressions_per_user: 1,
            test_impressions_per_user: 1,
            title_keywords: 3,
            title_noise: 1,
            body_keywords: 8,
            body_noise: 5,
            stopwords_per_doc: 4,
            history_focus: 0.85,
            click_on_topic: 0.9,
            click_off_topic: 0.03,
            embedding_dim: 32,
            keyword_spread: 0.5,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub news: Vec<NewsArticle>,
    pub train: Vec<ImpressionLog>,
    pub val: Vec<ImpressionLog>,
    pub test: Vec<ImpressionLog>,
    /// Planted keyword group of each topic.
    pub keywords: Vec<Vec<String>>,
    pub topic_names: Vec<String>,
    pub article_topic: HashMap<String, usize>,
    pub user_topic: HashMap<String, usize>,
    /// GloVe-format vectors for every generated word.
    pub embeddings_text: String,
}

fn topic_vocabulary(cfg: &SynthConfig) -> (Vec<String>, Vec<Vec<String>>) {
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for t in 0..cfg.topics {
        let (name, words) = THEMES
            .get(t)
            .map(|(n, w)| {
                (
                    n.to_string(),
                    w.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                )
            })
            .unwrap_or_else(|| (format!("topic{t}"), Vec::new()));
        let mut group: Vec<String> = words.into_iter().take(cfg.keywords_per_topic).collect();
        let mut i = 0;
        while group.len() < cfg.keywords_per_topic {
            group.push(format!("{name}kw{i}"));
            i += 1;
        }
        names.push(name);
        groups.push(group);
    }
    (names, groups)
}

fn noise_vocabulary(cfg: &SynthConfig) -> Vec<String> {
    let stop = StopwordList::english();
    let mut words: Vec<String> = NOISE
        .iter()
        .filter(|w| !stop.contains(w))
        .take(cfg.noise_words)
        .map(|s| s.to_string())
        .collect();
    let mut i = 0;
    while words.len() < cfg.noise_words {
        words.push(format!("filler{i}"));
        i += 1;
    }
    words
}

fn compose<R: Rng>(
    rng: &mut R,
    keywords: &[String],
    noise: &[String],
    k: usize,
    n: usize,
    s: usize,
) -> String {
    let mut words: Vec<&str> = Vec::with_capacity(k + n + s);
    for _ in 0..k {
        words.push(keywords.choose(rng).expect("keywords"));
    }
    for _ in 0..n {
        if let Some(w) = noise.choose(rng) {
            words.push(w);
        }
    }
    for _ in 0..s {
        words.push(FILLER_STOPWORDS.choose(rng).expect("stopwords"));
    }
    words.shuffle(rng);
    words.join(" ")
}

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

pub fn generate_synthetic_dataset(cfg: &SynthConfig) -> SyntheticDataset {
    assert!(
        cfg.topics >= 2,
        "synthetic data needs at least two planted topics"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (topic_names, keywords) = topic_vocabulary(cfg);
    let noise = noise_vocabulary(cfg);

    let mut news = Vec::with_capacity(cfg.news);
    let mut article_topic = HashMap::new();
    let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); cfg.topics];
    for i in 0..cfg.news {
        let t = i % cfg.topics;
        let id = format!("N{}", i + 1);
        let title = compose(
            &mut rng,
            &keywords[t],
            &noise,
            cfg.title_keywords,
            cfg.title_noise,
            1,
        );
        let abstract_text = compose(
            &mut rng,
            &keywords[t],
            &noise,
            cfg.body_keywords,
            cfg.body_noise,
            cfg.stopwords_per_doc,
        );
        news.push(NewsArticle {
            news_id: id.clone(),
            category: topic_names[t].clone(),
            subcategory: "synthetic".into(),
            title,
            abstract_text,
            url: format!("https://example.org/{id}"),
            body: String::new(),
        });
        article_topic.insert(id, t);
        by_topic[t].push(i);
    }

    let mut user_topic = HashMap::new();
    let mut splits: [Vec<ImpressionLog>; 3] = Default::default();
    let per_split = [
        cfg.train_impressions_per_user,
        cfg.val_impressions_per_user,
        cfg.test_impressions_per_user,
    ];
    let mut impression_id = 0usize;
    for u in 0..cfg.users {
        let user_id = format!("U{}", u + 1);
        let pref = rng.random_range(0..cfg.topics);
        user_topic.insert(user_id.clone(), pref);

        let mut history = Vec::with_capacity(cfg.history_len);
        while history.len() < cfg.history_len.min(cfg.news) {
            let pool = if rng.random::<f64>() < cfg.history_focus {
                &by_topic[pref]
            } else {
                &by_topic[rng.random_range(0..cfg.topics)]
            };
            let pick = *pool.choose(&mut rng).expect("non-empty topic");
            if !history.contains(&pick) {
                history.push(pick);
            }
        }

        let mut on_pool: Vec<usize> = by_topic[pref]
            .iter()
            .copied()
            .filter(|i| !history.contains(i))
            .collect();
        if on_pool.len() < cfg.candidates / 2 {
            on_pool.clone_from(&by_topic[pref]);
        }
        let off_pool: Vec<usize> = (0..cfg.topics)
            .filter(|&t| t != pref)
            .flat_map(|t| by_topic[t].iter().copied())
            .collect();
        for (split, &count) in per_split.iter().enumerate() {
            for _ in 0..count {
                impression_id += 1;
                let n_on = (cfg.candidates / 2).max(1).min(on_pool.len());
                let n_off = (cfg.candidates - n_on).max(1).min(off_pool.len());
                let mut cands: Vec<(usize, bool)> = on_pool
                    .choose_multiple(&mut rng, n_on)
                    .map(|&i| (i, true))
                    .chain(
                        off_pool
                            .choose_multiple(&mut rng, n_off)
                            .map(|&i| (i, false)),
                    )
                    .collect();
                cands.shuffle(&mut rng);
                let mut labels: Vec<u8> = cands
                    .iter()
                    .map(|&(_, on)| {
                        let p = if on {
                            cfg.click_on_topic
                        } else {
                            cfg.click_off_topic
                        };
                        u8::from(rng.random::<f64>() < p)
                    })
                    .collect();
                if !labels.contains(&1) {
                    let first_on = cands.iter().position(|c| c.1).expect("on-topic candidate");
                    labels[first_on] = 1;
                }
                if !labels.contains(&0) {
                    let first_off = cands
                        .iter()
                        .position(|c| !c.1)
                        .expect("off-topic candidate");
                    labels[first_off] = 0;
                }
                let day = 9 + split * 3 + rng.random_range(0..3);
                splits[split].push(ImpressionLog {
                    impression_id: impression_id.to_string(),
                    user_id: user_id.clone(),
                    timestamp: format!(
                        "11/{day}/2019 {}:{:02}:{:02} AM",
                        rng.random_range(1..12),
                        rng.random_range(0..60),
                        rng.random_range(0..60)
                    ),
                    history: history.iter().map(|&i| news[i].news_id.clone()).collect(),
                    candidates: cands
                        .iter()
                        .zip(&labels)
                        .map(|(&(i, _), &l)| (news[i].news_id.clone(), l))
                        .collect(),
                });
            }
        }
    }

    let dim = cfg.embedding_dim;
    let unit = 1.0 / (dim as f64).sqrt();
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for group in &keywords {
        let center = gaussian_vec(&mut rng, dim, unit);
        for w in group {
            let offset = gaussian_vec(&mut rng, dim, unit * cfg.keyword_spread);
            rows.push((
                w.clone(),
                center.iter().zip(&offset).map(|(c, o)| c + o).collect(),
            ));
        }
    }
    for w in noise
        .iter()
        .map(String::as_str)
        .chain(FILLER_STOPWORDS.iter().copied())
    {
        rows.push((w.to_string(), gaussian_vec(&mut rng, dim, unit)));
    }
    let embeddings_text =
        write_embeddings_text(rows.iter().map(|(w, v)| (w.as_str(), v.as_slice())));

    let [train, val, test] = splits;
    SyntheticDataset {
        news,
        train,
        val,
        test,
        keywords,
        topic_names,
        article_topic,
        user_topic,
        embeddings_text,
    }
}

impl SyntheticDataset {
    /// Writes `news.tsv`, `{train,valid,test}/behaviors.tsv`,
    /// `embeddings.txt` and `planted_topics.tsv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("news.tsv"), write_news_tsv(&self.news))?;
        for (name, logs) in [
            ("train", &self.train),
            ("valid", &self.val),
            ("test", &self.test),
        ] {
            std::fs::create_dir_all(dir.join(name))?;
            std::fs::write(
                dir.join(name).join("behaviors.tsv"),
                write_behaviors_tsv(logs),
            )?;
        }
        std::fs::write(dir.join("embeddings.txt"), &self.embeddings_text)?;
        let planted: String = self
            .topic_names
            .iter()
            .zip(&self.keywords)
            .map(|(n, k)| format!("{n}\t{}\n", k.join(" ")))
            .collect();
        std::fs::write(dir.join("planted_topics.tsv"), planted)
    }
}
