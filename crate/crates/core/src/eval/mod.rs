//! Cross-validated evaluation: the full-corpus, tweet-sampling and
//! real-life settings, plus their CSV reports.

mod full;
mod reallife;
mod report;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{TraitScores, UserRecord};
use crate::error::{Error, Result};
use crate::features::{
    build_ngram_vocab, EmbeddingTable, FeatureKind, FeatureVector, Featurizer, Lexicon, NgramOptions, OovPolicy,
};
use crate::models::{default_lambda_grid, train_big5, GpConfig, ModelKind, TrainConfig, TraitModelBundle, ValidationSplit};
use crate::preprocess::{preprocess_user_with, CleanOptions, TokenStream};
use crate::stats::{mae, pearson, PearsonResult};

pub use full::{run_full_setting, FoldAudit, FullReport, MethodResult};
pub use reallife::{run_reallife_setting, RealLifeMethod, RealLifeReport};
pub use report::{read_report_csv, write_report_csv, ReportRow};
pub use sampling::{run_sampling_setting, SamplingAggregation, SamplingConfig, SamplingCurve, SamplingPoint};

/// One feature set paired with one regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Method {
    pub feature: FeatureKind,
    pub model: ModelKind,
}

impl Method {
    pub fn new(feature: FeatureKind, model: ModelKind) -> Self {
        Method { feature, model }
    }

    /// Every feature set with both regressors.
    pub fn all() -> Vec<Method> {
        FeatureKind::ALL
            .iter()
            .flat_map(|&f| [ModelKind::Ridge, ModelKind::Gp].map(|m| Method::new(f, m)))
            .collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.feature, self.model)
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (f, m) = s
            .split_once('+')
            .ok_or_else(|| Error::invalid(format!("method must look like feature+model, got {s:?}")))?;
        Ok(Method::new(f.parse()?, m.parse()?))
    }
}

/// Feature resources shared by all folds.
#[derive(Debug, Clone, Copy)]
pub struct Resources<'a> {
    pub embeddings: Option<&'a EmbeddingTable>,
    pub lexicon: Option<&'a Lexicon>,
    pub ngram: NgramOptions,
    pub oov: OovPolicy,
}

impl<'a> Resources<'a> {
    pub fn new(embeddings: Option<&'a EmbeddingTable>, lexicon: Option<&'a Lexicon>) -> Self {
        Resources {
            embeddings,
            lexicon,
            ngram: NgramOptions::default(),
            oov: OovPolicy::default(),
        }
    }

    /// Builds a featurizer; n-gram vocabularies come from `training` only.
    pub fn featurizer(&self, kind: FeatureKind, training: &[&TokenStream]) -> Result<Featurizer<'a>> {
        match kind {
            FeatureKind::Embedding => self
                .embeddings
                .map(|t| Featurizer::Embedding(t, self.oov))
                .ok_or_else(|| Error::invalid("embedding features need an embedding table")),
            FeatureKind::Lexicon => self
                .lexicon
                .map(Featurizer::Lexicon)
                .ok_or_else(|| Error::invalid("lexicon features need a lexicon")),
            FeatureKind::Ngram => {
                let owned: Vec<TokenStream> = training.iter().map(|s| (*s).clone()).collect();
                Ok(Featurizer::Ngram(build_ngram_vocab(&owned, &self.ngram)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub gp: GpConfig,
    pub lambda_grid: Vec<f64>,
    pub clean: CleanOptions,
    pub clamp: bool,
}

impl EvalConfig {
    pub fn new(seed: u64) -> Self {
        EvalConfig {
            folds: 10,
            val_fraction: 0.25,
            seed,
            gp: GpConfig {
                seed,
                ..Default::default()
            },
            lambda_grid: default_lambda_grid(),
            clean: CleanOptions::default(),
            clamp: false,
        }
    }

    fn train_config(&self, model: ModelKind, validation: ValidationSplit) -> TrainConfig {
        TrainConfig {
            model,
            gp: self.gp.clone(),
            lambda_grid: self.lambda_grid.clone(),
            validation,
            clamp: self.clamp,
        }
    }
}

/// One cross-validation fold. `fit` and `validation` partition the training
/// side; all lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<usize>,
    pub fit: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Fold {
    /// Training side in ascending order.
    pub fn training(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.fit.iter().chain(&self.validation).copied().collect();
        t.sort_unstable();
        t
    }

    fn validation_mask(&self, training: &[usize]) -> Vec<bool> {
        training.iter().map(|i| self.validation.binary_search(i).is_ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

pub fn make_folds(n_users: usize, k: usize, val_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n_users < k {
        return Err(Error::invalid(format!("{n_users} users cannot fill {k} folds")));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction must be in (0, 1), got {val_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n_users).collect();
    perm.shuffle(&mut rng);
    let (base, extra) = (n_users / k, n_users % k);
    let mut start = 0;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = perm[start..start + size].to_vec();
        start += size;
        test.sort_unstable();
        let mut training: Vec<usize> = (0..n_users).filter(|i| test.binary_search(i).is_err()).collect();
        training.shuffle(&mut rng);
        let n_val = (val_fraction * training.len() as f64).round() as usize;
        let n_val = n_val.clamp(1, training.len().saturating_sub(1).max(1));
        let mut validation = training[..n_val].to_vec();
        let mut fit = training[n_val..].to_vec();
        validation.sort_unstable();
        fit.sort_unstable();
        folds.push(Fold { test, fit, validation });
    }
    Ok(SplitPlan { folds, seed })
}

/// Pearson r and MAE for one trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitMetrics {
    pub pearson: PearsonResult,
    pub mae: f64,
}

/// Scores predictions per trait. A correlation that is undefined because
/// the predictions are constant is reported as `r = 0` without a p-value.
pub(crate) fn score(pred: &[f64], actual: &[f64]) -> Result<TraitMetrics> {
    let pearson = match pearson(pred, actual) {
        Ok(p) => p,
        Err(Error::UndefinedCorrelation(_)) => PearsonResult {
            r: 0.0,
            p: None,
            n: pred.len(),
        },
        Err(e) => return Err(e),
    };
    Ok(TraitMetrics {
        pearson,
        mae: mae(pred, actual)?,
    })
}

pub(crate) fn preprocess_all(records: &[UserRecord], clean: &CleanOptions) -> Vec<TokenStream> {
    records.iter().map(|r| preprocess_user_with(&r.tweets, clean)).collect()
}

pub(crate) fn ids_digest<'a>(ids: impl Iterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Features for users `rows`, reusing fold-independent ones when available.
pub(crate) fn features_for(
    featurizer: &Featurizer<'_>,
    streams: &[TokenStream],
    cached: Option<&[FeatureVector]>,
    rows: &[usize],
) -> Result<Vec<FeatureVector>> {
    rows.iter()
        .map(|&i| match cached {
            Some(c) => Ok(c[i].clone()),
            None => featurizer.extract(&streams[i]),
        })
        .collect()
}

/// Features of every user for fold-independent kinds.
pub(crate) fn cache_features(
    kind: FeatureKind,
    res: &Resources<'_>,
    streams: &[TokenStream],
) -> Result<Option<Vec<FeatureVector>>> {
    if kind == FeatureKind::Ngram {
        return Ok(None);
    }
    let f = res.featurizer(kind, &[])?;
    streams.iter().map(|s| f.extract(s)).collect::<Result<Vec<_>>>().map(Some)
}

/// Trains one method on `training` users.
pub(crate) fn train_on<'a>(
    method: Method,
    records: &[UserRecord],
    streams: &[TokenStream],
    cached: Option<&[FeatureVector]>,
    training: &[usize],
    validation: ValidationSplit,
    res: &Resources<'a>,
    cfg: &EvalConfig,
) -> Result<(Featurizer<'a>, TraitModelBundle)> {
    let train_streams: Vec<&TokenStream> = training.iter().map(|&i| &streams[i]).collect();
    let featurizer = res.featurizer(method.feature, &train_streams)?;
    let x = features_for(&featurizer, streams, cached, training)?;
    let ids: Vec<String> = training.iter().map(|&i| records[i].user_id.clone()).collect();
    let y: Vec<TraitScores> = training.iter().map(|&i| records[i].traits).collect();
    let bundle = train_big5(&ids, &x, &y, featurizer.config(), &cfg.train_config(method.model, validation))?;
    Ok((featurizer, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_shapes() {
        let p = make_folds(10, 10, 0.25, 1).unwrap();
        assert!(p.folds.iter().all(|f| f.test.len() == 1));
        let p = make_folds(1323, 10, 0.25, 1).unwrap();
        assert!(p.folds.iter().all(|f| f.test.len() == 132 || f.test.len() == 133));
        let f = &p.folds[0];
        let train_side = 1323 - f.test.len();
        assert_eq!(f.validation.len(), (0.25 * train_side as f64).round() as usize);
        assert_eq!(p, make_folds(1323, 10, 0.25, 1).unwrap());
        assert_ne!(p, make_folds(1323, 10, 0.25, 2).unwrap());
    }

    #[test]
    fn folds_partition_users() {
        for (n, k) in [(23, 5), (100, 10), (7, 2)] {
            let p = make_folds(n, k, 0.3, 9).unwrap();
            let mut seen = vec![0; n];
            for f in &p.folds {
                for &i in &f.test {
                    seen[i] += 1;
                }
                assert!(f.fit.iter().all(|i| f.validation.binary_search(i).is_err()));
                assert!(f.training().iter().all(|i| f.test.binary_search(i).is_err()));
                assert_eq!(f.training().len() + f.test.len(), n);
            }
            assert!(seen.iter().all(|&c| c == 1));
            let sizes: Vec<usize> = p.folds.iter().map(|f| f.test.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn fold_errors() {
        assert!(make_folds(5, 10, 0.25, 0).is_err());
        assert!(make_folds(20, 1, 0.25, 0).is_err());
        assert!(make_folds(20, 5, 0.0, 0).is_err());
        assert!(make_folds(20, 5, 1.0, 0).is_err());
    }

    #[test]
    fn method_names() {
        let all = Method::all();
        assert_eq!(all.len(), 6);
        for m in all {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("glove".parse::<Method>().is_err());
    }
}
