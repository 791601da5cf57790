//! Flags shared by every subcommand, with `key=value` config-file fallback.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use persona_core::eval::Method;
use persona_core::{FeatureKind, ModelKind, OovPolicy};

use crate::Failure;

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Flat `key=value` file; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus in JSON-lines format (training corpus for the real-life setting).
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Held-out corpus for the real-life setting.
    #[arg(long, value_name = "PATH")]
    pub test_corpus: Option<PathBuf>,
    #[arg(long, value_name = "embedding|lexicon|ngram")]
    pub features: Option<String>,
    #[arg(long, value_name = "gp|ridge")]
    pub model: Option<String>,
    /// Comma-separated `feature+model` pairs, e.g. `embedding+gp,ngram+ridge`.
    #[arg(long)]
    pub methods: Option<String>,
    /// Word vectors, one `word v1 … vD` line per word.
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// `category<TAB>pattern` lexicon; patterns may end in `*`.
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Users whose tokens are all out of vocabulary: fail or use a zero vector.
    #[arg(long, value_name = "error|zero-vector")]
    pub oov: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub subsets: Option<usize>,
    #[arg(long, value_name = "N,N,…")]
    pub tweet_counts: Option<String>,
    /// Drop users with fewer tweets when loading a corpus.
    #[arg(long)]
    pub min_tweets: Option<usize>,
    /// Drop tweets starting with "RT " when loading a corpus.
    #[arg(long)]
    pub drop_retweets: bool,
    #[arg(long, value_name = "PATH")]
    pub bundle: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("invalid value {v:?} for {key}")))
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_owned());
    }
    Ok(map)
}

impl Opts {
    /// Fills unset flags from the config file, if one was given.
    pub fn resolve(mut self) -> Result<Opts, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        for (k, v) in read_config(&path)? {
            let v = v.as_str();
            match k.as_str() {
                "seed" => fill(&mut self.seed, || parse(&k, v))?,
                "corpus" => fill(&mut self.corpus, || Ok(v.into()))?,
                "test-corpus" => fill(&mut self.test_corpus, || Ok(v.into()))?,
                "features" => fill(&mut self.features, || Ok(v.into()))?,
                "model" => fill(&mut self.model, || Ok(v.into()))?,
                "methods" => fill(&mut self.methods, || Ok(v.into()))?,
                "embeddings" => fill(&mut self.embeddings, || Ok(v.into()))?,
                "lexicon" => fill(&mut self.lexicon, || Ok(v.into()))?,
                "oov" => fill(&mut self.oov, || Ok(v.into()))?,
                "folds" => fill(&mut self.folds, || parse(&k, v))?,
                "val-fraction" => fill(&mut self.val_fraction, || parse(&k, v))?,
                "subsets" => fill(&mut self.subsets, || parse(&k, v))?,
                "tweet-counts" => fill(&mut self.tweet_counts, || Ok(v.into()))?,
                "min-tweets" => fill(&mut self.min_tweets, || parse(&k, v))?,
                "drop-retweets" => self.drop_retweets |= parse::<bool>(&k, v)?,
                "bundle" => fill(&mut self.bundle, || Ok(v.into()))?,
                "out" => fill(&mut self.out, || Ok(v.into()))?,
                _ => return Err(Failure::Usage(format!("unknown config key {k:?}"))),
            }
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn folds(&self) -> usize {
        self.folds.unwrap_or(10)
    }

    pub fn val_fraction(&self) -> f64 {
        self.val_fraction.unwrap_or(0.25)
    }

    pub fn subsets(&self) -> usize {
        self.subsets.unwrap_or(20)
    }

    pub fn features(&self) -> Result<Option<FeatureKind>, Failure> {
        self.features.as_deref().map(|s| parse("--features", s)).transpose()
    }

    pub fn model(&self) -> Result<Option<ModelKind>, Failure> {
        self.model.as_deref().map(|s| parse("--model", s)).transpose()
    }

    pub fn oov(&self) -> Result<OovPolicy, Failure> {
        match self.oov.as_deref() {
            None | Some("error") => Ok(OovPolicy::Error),
            Some("zero-vector") => Ok(OovPolicy::ZeroVector),
            Some(v) => Err(Failure::Usage(format!("invalid value {v:?} for --oov"))),
        }
    }

    pub fn tweet_counts(&self) -> Result<Vec<usize>, Failure> {
        let Some(s) = &self.tweet_counts else {
            return Ok(vec![10, 25, 50, 75, 100, 150, 200]);
        };
        let counts: Vec<usize> = s.split(',').map(|c| parse("--tweet-counts", c)).collect::<Result<_, _>>()?;
        if counts.is_empty() || counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Failure::Usage("--tweet-counts must be positive and strictly increasing".into()));
        }
        Ok(counts)
    }

    /// Methods from `--methods`, else from `--features`/`--model` (each
    /// defaulting to every choice), else `default`.
    pub fn methods(&self, default: Vec<Method>) -> Result<Vec<Method>, Failure> {
        if let Some(list) = &self.methods {
            return list.split(',').map(|m| parse("--methods", m)).collect();
        }
        let (f, m) = (self.features()?, self.model()?);
        if f.is_none() && m.is_none() {
            return Ok(default);
        }
        Ok(Method::all()
            .into_iter()
            .filter(|x| f.is_none_or(|f| f == x.feature) && m.is_none_or(|m| m == x.model))
            .collect())
    }

    pub fn out_dir(&self) -> Result<PathBuf, Failure> {
        self.out.clone().ok_or_else(|| Failure::Usage("--out DIR is required".into()))
    }
}

fn fill<T>(slot: &mut Option<T>, v: impl FnOnce() -> Result<T, Failure>) -> Result<(), Failure> {
    if slot.is_none() {
        *slot = Some(v()?);
    }
    Ok(())
}

/// An existing input file named by `flag`.
pub fn existing(path: &Option<PathBuf>, flag: &str, why: &str) -> Result<PathBuf, Failure> {
    let p = path
        .clone()
        .ok_or_else(|| Failure::Usage(format!("{flag} PATH is required {why}")))?;
    if !p.is_file() {
        return Err(Failure::Usage(format!("{flag}: no such file {}", p.display())));
    }
    Ok(p)
}
