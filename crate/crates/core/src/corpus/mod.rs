//! User corpora: tweets plus normalized Big-5 ground truth.
//!
//! The on-disk format is one JSON object per line:
//!
//! ```text
//! {"user_id": "u1", "traits": {"o":0.76,"c":0.59,"e":0.54,"a":0.72,"n":0.44}, "tweets": ["...", "..."]}
//! ```

mod synth;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{
    generate_synthetic, synthetic_lexicon, synthetic_table, truncate_tweets, SyntheticConfig,
    SYNTHETIC_SIGNAL_STD,
};

/// One of the five OCEAN dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    O,
    C,
    E,
    A,
    N,
}

impl Trait {
    pub const ALL: [Trait; 5] = [Trait::O, Trait::C, Trait::E, Trait::A, Trait::N];

    pub fn key(self) -> &'static str {
        match self {
            Trait::O => "o",
            Trait::C => "c",
            Trait::E => "e",
            Trait::A => "a",
            Trait::N => "n",
        }
    }

    pub fn from_key(key: &str) -> Option<Trait> {
        Trait::ALL.into_iter().find(|t| t.key() == key)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A value per Big-5 trait. Serializes as `{"o":…,"c":…,"e":…,"a":…,"n":…}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Big5<T> {
    pub o: T,
    pub c: T,
    pub e: T,
    pub a: T,
    pub n: T,
}

impl<T> Big5<T> {
    pub fn from_fn(mut f: impl FnMut(Trait) -> T) -> Self {
        Big5 {
            o: f(Trait::O),
            c: f(Trait::C),
            e: f(Trait::E),
            a: f(Trait::A),
            n: f(Trait::N),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(Trait) -> Result<T, E>) -> Result<Self, E> {
        Ok(Big5 {
            o: f(Trait::O)?,
            c: f(Trait::C)?,
            e: f(Trait::E)?,
            a: f(Trait::A)?,
            n: f(Trait::N)?,
        })
    }

    pub fn get(&self, t: Trait) -> &T {
        match t {
            Trait::O => &self.o,
            Trait::C => &self.c,
            Trait::E => &self.e,
            Trait::A => &self.a,
            Trait::N => &self.n,
        }
    }

    pub fn get_mut(&mut self, t: Trait) -> &mut T {
        match t {
            Trait::O => &mut self.o,
            Trait::C => &mut self.c,
            Trait::E => &mut self.e,
            Trait::A => &mut self.a,
            Trait::N => &mut self.n,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Trait, &T) -> U) -> Big5<U> {
        Big5::from_fn(|t| f(t, self.get(t)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Trait, &T)> {
        Trait::ALL.into_iter().map(move |t| (t, self.get(t)))
    }
}

impl Big5<f64> {
    /// Arithmetic mean over the five traits.
    pub fn mean(&self) -> f64 {
        (self.o + self.c + self.e + self.a + self.n) / 5.0
    }
}

/// Normalized survey scores, each in `[0, 1]`.
pub type TraitScores = Big5<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub traits: TraitScores,
    pub tweets: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadOptions {
    /// Users with fewer tweets than this are dropped. A user with no tweets
    /// at all is always dropped.
    pub min_tweets: usize,
    /// Raw survey scale `(min, max)`; traits are mapped onto `[0, 1]`. When
    /// absent the file must already hold normalized traits.
    pub raw_scale: Option<(f64, f64)>,
    /// Discard tweets starting with `"RT "` before counting.
    pub drop_retweets: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadSummary {
    pub lines: usize,
    pub kept: usize,
    pub dropped_short: usize,
    pub retweets_removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<UserRecord>,
    pub summary: LoadSummary,
}

pub fn normalize_score(raw: f64, raw_min: f64, raw_max: f64) -> Result<f64> {
    if !(raw_min < raw_max) || !raw_min.is_finite() || !raw_max.is_finite() {
        return Err(Error::invalid(format!(
            "raw scale requires min < max, got [{raw_min}, {raw_max}]"
        )));
    }
    if !(raw >= raw_min && raw <= raw_max) {
        return Err(Error::invalid(format!(
            "score {raw} outside raw range [{raw_min}, {raw_max}]"
        )));
    }
    Ok((raw - raw_min) / (raw_max - raw_min))
}

pub fn load_corpus(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), opts)
}

pub fn read_corpus<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Corpus> {
    let (lo, hi) = opts.raw_scale.unwrap_or((0.0, 1.0));
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut summary = LoadSummary::default();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            what: "corpus",
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        summary.lines += 1;
        let mut rec: UserRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            what: "corpus",
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.user_id.is_empty() {
            return Err(Error::Parse {
                what: "corpus",
                line: lineno,
                message: "empty user_id".into(),
            });
        }
        if !seen.insert(rec.user_id.clone()) {
            return Err(Error::Parse {
                what: "corpus",
                line: lineno,
                message: format!("duplicate user_id {:?}", rec.user_id),
            });
        }
        rec.traits = Big5::try_from_fn(|t| {
            normalize_score(*rec.traits.get(t), lo, hi).map_err(|_| Error::Parse {
                what: "corpus",
                line: lineno,
                message: format!(
                    "trait {t} = {} outside declared range [{lo}, {hi}]",
                    rec.traits.get(t)
                ),
            })
        })?;
        if opts.drop_retweets {
            let before = rec.tweets.len();
            rec.tweets.retain(|t| !t.starts_with("RT "));
            summary.retweets_removed += before - rec.tweets.len();
        }
        if rec.tweets.is_empty() || rec.tweets.len() < opts.min_tweets {
            summary.dropped_short += 1;
            continue;
        }
        records.push(rec);
    }
    summary.kept = records.len();
    Ok(Corpus { records, summary })
}

pub fn save_corpus(path: impl AsRef<Path>, records: &[UserRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(w: &mut W, records: &[UserRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub traits: Big5<MeanStd>,
    pub tweet_count: MeanStd,
    pub users: usize,
}

/// Sample mean and population standard deviation.
pub(crate) fn mean_std(values: impl Iterator<Item = f64> + Clone) -> MeanStd {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.max(0.0).sqrt(),
    }
}

pub fn corpus_stats(records: &[UserRecord]) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Error::invalid("corpus_stats needs at least one record"));
    }
    Ok(CorpusStats {
        traits: Big5::from_fn(|t| mean_std(records.iter().map(move |r| *r.traits.get(t)))),
        tweet_count: mean_std(records.iter().map(|r| r.tweets.len() as f64)),
        users: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, n_tweets: usize) -> String {
        let tweets: Vec<String> = (0..n_tweets).map(|i| format!("tweet {i}")).collect();
        serde_json::to_string(&UserRecord {
            user_id: id.into(),
            traits: Big5 {
                o: 0.76,
                c: 0.59,
                e: 0.54,
                a: 0.72,
                n: 0.44,
            },
            tweets,
        })
        .unwrap()
    }

    fn load(text: &str, opts: &LoadOptions) -> Result<Corpus> {
        read_corpus(text.as_bytes(), opts)
    }

    #[test]
    fn threshold_filter() {
        let text = [line("a", 250), line("b", 10), line("c", 300)].join("\n");
        let opts = LoadOptions {
            min_tweets: 200,
            ..Default::default()
        };
        let c = load(&text, &opts).unwrap();
        assert_eq!(c.records.len(), 2);
        assert_eq!(c.summary.dropped_short, 1);
        assert_eq!(c.summary.kept, 2);
    }

    #[test]
    fn empty_file() {
        let c = load("", &LoadOptions::default()).unwrap();
        assert!(c.records.is_empty());
        assert_eq!(c.summary.kept, 0);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = format!("{}\n{{not json\n", line("a", 1));
        match load(&text, &LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_user_rejected() {
        let text = [line("a", 1), line("a", 2)].join("\n");
        assert!(matches!(
            load(&text, &LoadOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn trait_outside_range() {
        let text = r#"{"user_id":"x","traits":{"o":1.5,"c":0,"e":0,"a":0,"n":0},"tweets":["a"]}"#;
        assert!(load(text, &LoadOptions::default()).is_err());
        // the same value is fine on an explicit raw scale
        let opts = LoadOptions {
            raw_scale: Some((1.0, 5.0)),
            ..Default::default()
        };
        let text = r#"{"user_id":"x","traits":{"o":1.5,"c":1,"e":5,"a":3,"n":1},"tweets":["a"]}"#;
        let c = load(text, &opts).unwrap();
        assert_eq!(c.records[0].traits.o, 0.125);
        assert_eq!(c.records[0].traits.e, 1.0);
        assert_eq!(c.records[0].traits.a, 0.5);
    }

    #[test]
    fn unknown_trait_key_rejected() {
        let text = r#"{"user_id":"x","traits":{"O":0.1,"c":0,"e":0,"a":0,"n":0},"tweets":["a"]}"#;
        assert!(load(text, &LoadOptions::default()).is_err());
    }

    #[test]
    fn retweet_rule() {
        let text = r#"{"user_id":"x","traits":{"o":0,"c":0,"e":0,"a":0,"n":0},"tweets":["RT @a: hi","own words","RTfm"]}"#;
        let opts = LoadOptions {
            drop_retweets: true,
            min_tweets: 2,
            ..Default::default()
        };
        let c = load(text, &opts).unwrap();
        assert_eq!(c.records[0].tweets, vec!["own words", "RTfm"]);
        assert_eq!(c.summary.retweets_removed, 1);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_score(50.0, 10.0, 50.0).unwrap(), 1.0);
        assert_eq!(normalize_score(10.0, 10.0, 50.0).unwrap(), 0.0);
        assert_eq!(normalize_score(30.0, 10.0, 50.0).unwrap(), 0.5);
        assert!(normalize_score(51.0, 10.0, 50.0).is_err());
        assert!(normalize_score(1.0, 5.0, 5.0).is_err());
        assert!(normalize_score(f64::NAN, 0.0, 1.0).is_err());
    }

    fn user(o: f64, tweets: usize) -> UserRecord {
        UserRecord {
            user_id: format!("u{o}"),
            traits: Big5 {
                o,
                c: 0.3,
                e: 0.3,
                a: 0.3,
                n: 0.3,
            },
            tweets: vec!["x".into(); tweets],
        }
    }

    #[test]
    fn stats_examples() {
        let s = corpus_stats(&[user(0.5, 1), user(0.7, 3)]).unwrap();
        assert!((s.traits.o.mean - 0.6).abs() < 1e-12);
        assert!((s.traits.o.std - 0.1).abs() < 1e-12);
        assert_eq!(s.traits.c.std, 0.0);
        assert_eq!(s.tweet_count.mean, 2.0);
        assert_eq!(s.tweet_count.std, 1.0);
        assert_eq!(s.users, 2);

        let one = corpus_stats(&[user(0.9, 4)]).unwrap();
        assert_eq!(one.traits.o.std, 0.0);
        assert_eq!(one.tweet_count.std, 0.0);

        assert!(corpus_stats(&[]).is_err());
    }

    #[test]
    fn stats_duplicated_corpus_same_means() {
        let base = vec![user(0.1, 2), user(0.45, 5), user(0.8, 9)];
        let mut doubled = base.clone();
        doubled.extend(base.clone());
        let a = corpus_stats(&base).unwrap();
        let b = corpus_stats(&doubled).unwrap();
        for t in Trait::ALL {
            assert!((a.traits.get(t).mean - b.traits.get(t).mean).abs() < 1e-12);
        }
        assert!((a.tweet_count.mean - b.tweet_count.mean).abs() < 1e-12);
    }

    #[test]
    fn big5_json_shape() {
        let s = serde_json::to_string(&Big5 {
            o: 1,
            c: 2,
            e: 3,
            a: 4,
            n: 5,
        })
        .unwrap();
        assert_eq!(s, r#"{"o":1,"c":2,"e":3,"a":4,"n":5}"#);
    }
}
