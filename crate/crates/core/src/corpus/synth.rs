//! Seeded synthetic corpora with a planted text/trait relationship.
//!
//! Every user has a latent taste vector `u`; words are drawn with weights
//! `base(w) · exp(β⟨v_w, u⟩ / √D)` where `v_w` is the word's embedding. A
//! user's noiseless trait score is affine in the average embedding of their
//! in-vocabulary tokens, so averaged embeddings recover it exactly. Tweets are
//! decorated with URLs, hashtags, numbers, capitals and punctuation that
//! cleaning removes again.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use super::{Big5, Trait, UserRecord};
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, Lexicon, Pattern};

/// Standard deviation of the noiseless part of each synthetic trait.
pub const SYNTHETIC_SIGNAL_STD: f64 = 0.12;

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub tweets_per_user: usize,
    pub words_per_tweet: (usize, usize),
    /// Share of tokens drawn from words missing from the embedding table.
    pub oov_rate: f64,
    /// Strength of the latent taste on word choice.
    pub beta: f64,
    /// Standard deviation of the Gaussian noise added to each trait.
    /// Equal to [`SYNTHETIC_SIGNAL_STD`], half the trait variance is signal.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 300,
            tweets_per_user: 200,
            words_per_tweet: (5, 15),
            oov_rate: 0.08,
            beta: 1.0,
            noise_std: SYNTHETIC_SIGNAL_STD,
            seed: 0,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn fresh_word(rng: &mut ChaCha8Rng, taken: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(1..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if rng.random_bool(0.3) {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        }
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

/// A table of `vocab_size` lowercase words with standard normal vectors.
pub fn synthetic_table(vocab_size: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if vocab_size == 0 || dim == 0 {
        return Err(Error::invalid("synthetic table needs a nonempty vocabulary and dimension"));
    }
    let mut rng = rng_for(seed, 1);
    let mut taken = HashSet::new();
    let entries: Vec<(String, Vec<f32>)> = (0..vocab_size)
        .map(|_| {
            let w = fresh_word(&mut rng, &mut taken);
            let v = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
            (w, v)
        })
        .collect();
    EmbeddingTable::new(dim, entries)
}

/// A lexicon of `n_categories` categories over random table words; every
/// third category also gets a prefix pattern.
pub fn synthetic_lexicon(table: &EmbeddingTable, n_categories: usize, seed: u64) -> Result<Lexicon> {
    if n_categories == 0 || table.is_empty() {
        return Err(Error::invalid("synthetic lexicon needs categories and words"));
    }
    let mut rng = rng_for(seed, 2);
    let words = table.words();
    let per_cat = (words.len() / n_categories).clamp(1, 40);
    let mut lex = Lexicon::new();
    for c in 0..n_categories {
        let name = format!("cat{c:02}");
        for i in index::sample(&mut rng, words.len(), per_cat.min(words.len())) {
            lex.add(&name, Pattern::Word(words[i].clone()));
        }
        if c % 3 == 0 {
            let w = &words[rng.random_range(0..words.len())];
            let stem: String = w.chars().take(3).collect();
            lex.add(&name, Pattern::Prefix(stem));
        }
    }
    Ok(lex)
}

fn decorate(rng: &mut ChaCha8Rng, words: &[&str], oov: &[String]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(words.len() + 3);
    for (i, w) in words.iter().enumerate() {
        let mut s = (*w).to_owned();
        if i == 0 && rng.random_bool(0.3) {
            let mut c = s.chars();
            let first = c.next().map(|f| f.to_ascii_uppercase()).unwrap_or_default();
            s = std::iter::once(first).chain(c).collect();
        }
        if rng.random_bool(0.05) {
            s.push(if rng.random_bool(0.5) { ',' } else { '\'' });
        }
        parts.push(s);
        if rng.random_bool(0.03) {
            parts.push(rng.random_range(1..3000).to_string());
        }
    }
    match rng.random_range(0..4) {
        0 => parts.last_mut().unwrap().push('!'),
        1 => parts.last_mut().unwrap().push('.'),
        _ => {}
    }
    if rng.random_bool(0.2) {
        let tag = &oov[rng.random_range(0..oov.len())];
        parts.push(format!("#{tag}"));
    }
    if rng.random_bool(0.15) {
        let slug: String = (0..6).map(|_| VOWELS[rng.random_range(0..VOWELS.len())] as char).collect();
        parts.push(format!("https://t.co/{slug}{}", rng.random_range(0..100)));
    }
    if rng.random_bool(0.05) {
        parts.push("😀".to_owned());
    }
    parts.join(" ")
}

/// Users with planted traits. Without noise every trait equals
/// `0.5 + SYNTHETIC_SIGNAL_STD · z`, `z` being a standardized projection of
/// the user's average token embedding (clamped to `[0, 1]`).
pub fn generate_synthetic(table: &EmbeddingTable, cfg: &SyntheticConfig) -> Result<Vec<UserRecord>> {
    let (lo, hi) = cfg.words_per_tweet;
    if cfg.n_users == 0 || cfg.tweets_per_user == 0 || lo == 0 || lo > hi {
        return Err(Error::invalid("synthetic corpus needs users, tweets and a valid words-per-tweet range"));
    }
    if !(0.0..1.0).contains(&cfg.oov_rate) || !(cfg.noise_std >= 0.0) {
        return Err(Error::invalid("oov_rate must be in [0, 1) and noise_std nonnegative"));
    }
    let dim = table.dim();
    let words = table.words();
    let vectors: Vec<&[f32]> = words.iter().map(|w| table.get(w).unwrap()).collect();

    let mut shared = rng_for(cfg.seed, 3);
    let mut taken: HashSet<String> = words.iter().cloned().collect();
    let oov: Vec<String> = (0..(words.len() / 10).max(5)).map(|_| fresh_word(&mut shared, &mut taken)).collect();
    let base: Vec<f64> = (0..words.len()).map(|r| 1.0 / (r as f64 + 10.0)).collect();
    let directions: Big5<Vec<f64>> = Big5::from_fn(|_| {
        let v: Vec<f64> = (0..dim).map(|_| shared.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    });

    let scale = cfg.beta / (dim as f64).sqrt();
    let mut users = Vec::with_capacity(cfg.n_users);
    for u in 0..cfg.n_users {
        let mut rng = rng_for(cfg.seed, 1000 + u as u64);
        let taste: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let weights: Vec<f64> = vectors
            .iter()
            .zip(&base)
            .map(|(v, b)| b * (scale * v.iter().zip(&taste).map(|(a, t)| *a as f64 * t).sum::<f64>()).exp())
            .collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut sum = vec![0.0f64; dim];
        let mut covered = 0usize;
        let mut tweets = Vec::with_capacity(cfg.tweets_per_user);
        for _ in 0..cfg.tweets_per_user {
            let len = rng.random_range(lo..=hi);
            let mut tw: Vec<&str> = Vec::with_capacity(len);
            for _ in 0..len {
                if rng.random_bool(cfg.oov_rate) {
                    tw.push(&oov[rng.random_range(0..oov.len())]);
                } else {
                    let i = pick.sample(&mut rng);
                    for (s, x) in sum.iter_mut().zip(vectors[i]) {
                        *s += *x as f64;
                    }
                    covered += 1;
                    tw.push(&words[i]);
                }
            }
            tweets.push(decorate(&mut rng, &tw, &oov));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / covered.max(1) as f64).collect();
        let noise: Big5<f64> = Big5::from_fn(|_| if cfg.noise_std > 0.0 { rng.sample(StandardNormal) } else { 0.0 });
        users.push((format!("user{u:05}"), mean, noise, tweets));
    }

    let proj = |t: Trait, m: &[f64]| directions.get(t).iter().zip(m).map(|(d, x)| d * x).sum::<f64>();
    let stats: Big5<(f64, f64)> = Big5::from_fn(|t| {
        let z: Vec<f64> = users.iter().map(|u| proj(t, &u.1)).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let s = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64).sqrt();
        (m, if s > 0.0 { s } else { 1.0 })
    });
    Ok(users
        .into_iter()
        .map(|(user_id, mean, eps, tweets)| {
            let traits = Big5::from_fn(|t| {
                let (m, s) = *stats.get(t);
                let z = (proj(t, &mean) - m) / s;
                (0.5 + SYNTHETIC_SIGNAL_STD * z + cfg.noise_std * eps.get(t)).clamp(0.0, 1.0)
            });
            UserRecord {
                user_id,
                traits,
                tweets,
            }
        })
        .collect())
}

/// Keeps a random, order-preserving subset of each user's tweets whose size
/// is drawn from `N(mean, std)` and clamped to `[1, available]`.
pub fn truncate_tweets(records: &[UserRecord], mean: f64, std: f64, seed: u64) -> Result<Vec<UserRecord>> {
    let dist = Normal::new(mean, std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_for(seed, 4);
    Ok(records
        .iter()
        .map(|r| {
            let avail = r.tweets.len();
            let k = (dist.sample(&mut rng).round().max(1.0) as usize).min(avail);
            let mut keep: Vec<usize> = index::sample(&mut rng, avail, k).into_vec();
            keep.sort_unstable();
            UserRecord {
                user_id: r.user_id.clone(),
                traits: r.traits,
                tweets: keep.into_iter().map(|i| r.tweets[i].clone()).collect(),
            }
        })
        .collect())
}
