use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::ReportRow;
use super::{cache_features, features_for, make_folds, preprocess_all, score, train_on, EvalConfig, Method, Resources};
use crate::corpus::{Big5, Trait, TraitScores, UserRecord};
use crate::error::{Error, Result};
use crate::models::ValidationSplit;

/// How replicate predictions turn into one number per tweet count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingAggregation {
    /// Correlate each replicate separately, then average the correlations.
    #[default]
    PerReplicate,
    /// Average each user's predictions over replicates, then correlate once.
    AveragePredictions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Strictly increasing.
    pub tweet_counts: Vec<usize>,
    pub n_subsets: usize,
    pub aggregation: SamplingAggregation,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            tweet_counts: vec![10, 25, 50, 75, 100, 150, 200],
            n_subsets: 20,
            aggregation: SamplingAggregation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPoint {
    pub tweet_count: usize,
    /// Aggregated correlation averaged over the five traits.
    pub mean_r: f64,
    /// Aggregated correlation per trait.
    pub per_trait: Big5<f64>,
    /// Per-replicate correlations, one entry per subset draw.
    pub replicates: Vec<Big5<f64>>,
}

impl SamplingPoint {
    /// Trait-averaged correlation of each replicate.
    pub fn replicate_means(&self) -> Vec<f64> {
        self.replicates.iter().map(Big5::mean).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingCurve {
    pub method: Method,
    pub points: Vec<SamplingPoint>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one subset draw, a pure function of its coordinates.
fn subset_seed(seed: u64, user_id: &str, count: usize, replicate: usize) -> u64 {
    let digest = Sha256::digest(user_id.as_bytes());
    let user = u64::from_le_bytes(digest[..8].try_into().unwrap());
    mix(mix(mix(seed ^ mix(user)) ^ count as u64) ^ replicate as u64)
}

/// Sorted indices of a `count`-tweet subset drawn without replacement.
pub(crate) fn subset_indices(n_tweets: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n_tweets, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Trains per fold on the full text of the training users, then predicts each
/// test user from random tweet subsets of every requested size.
pub fn run_sampling_setting(
    records: &[UserRecord],
    methods: &[Method],
    res: &Resources<'_>,
    cfg: &EvalConfig,
    sampling: &SamplingConfig,
) -> Result<Vec<SamplingCurve>> {
    let counts = &sampling.tweet_counts;
    if counts.is_empty() || counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("tweet counts must be positive and strictly increasing"));
    }
    if sampling.n_subsets == 0 {
        return Err(Error::invalid("need at least one subset per tweet count"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods to evaluate"));
    }
    let max_count = *counts.last().unwrap();
    if let Some(r) = records.iter().find(|r| r.tweets.len() < max_count) {
        return Err(Error::invalid(format!(
            "user {} has {} tweets, fewer than the requested {max_count}",
            r.user_id,
            r.tweets.len()
        )));
    }
    let plan = make_folds(records.len(), cfg.folds, cfg.val_fraction, cfg.seed)?;
    let streams = preprocess_all(records, &cfg.clean);
    let actual: Big5<Vec<f64>> = Big5::from_fn(|t| records.iter().map(|r| *r.traits.get(t)).collect());
    let mut curves = Vec::with_capacity(methods.len());
    for &method in methods {
        let cached = cache_features(method.feature, res, &streams)?;
        // preds[count][replicate][user]
        let mut preds = vec![vec![vec![TraitScores::default(); records.len()]; sampling.n_subsets]; counts.len()];
        for fold in &plan.folds {
            let training = fold.training();
            let mask = fold.validation_mask(&training);
            let (featurizer, bundle) = train_on(
                method,
                records,
                &streams,
                cached.as_deref(),
                &training,
                ValidationSplit::Explicit(mask),
                res,
                cfg,
            )?;
            for &u in &fold.test {
                let stream = &streams[u];
                for (ci, &c) in counts.iter().enumerate() {
                    for (s, rep) in preds[ci].iter_mut().enumerate() {
                        let seed = subset_seed(cfg.seed, &records[u].user_id, c, s);
                        let sub = stream.select_tweets(&subset_indices(stream.tweet_count(), c, seed));
                        let x = features_for(&featurizer, std::slice::from_ref(&sub), None, &[0])?;
                        rep[u] = bundle.predict(&x[0])?;
                    }
                }
            }
        }
        let points = counts
            .iter()
            .zip(&preds)
            .map(|(&c, reps)| {
                let replicates: Vec<Big5<f64>> = reps
                    .iter()
                    .map(|p| {
                        Big5::try_from_fn(|t| {
                            let v: Vec<f64> = p.iter().map(|s| *s.get(t)).collect();
                            Ok::<_, Error>(score(&v, actual.get(t))?.pearson.r)
                        })
                    })
                    .collect::<Result<_>>()?;
                let per_trait = match sampling.aggregation {
                    SamplingAggregation::PerReplicate => Big5::from_fn(|t| {
                        replicates.iter().map(|r| *r.get(t)).sum::<f64>() / replicates.len() as f64
                    }),
                    SamplingAggregation::AveragePredictions => Big5::try_from_fn(|t| {
                        let avg: Vec<f64> = (0..records.len())
                            .map(|u| reps.iter().map(|p| *p[u].get(t)).sum::<f64>() / reps.len() as f64)
                            .collect();
                        Ok::<_, Error>(score(&avg, actual.get(t))?.pearson.r)
                    })?,
                };
                Ok(SamplingPoint {
                    tweet_count: c,
                    mean_r: per_trait.mean(),
                    per_trait,
                    replicates,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        curves.push(SamplingCurve { method, points });
    }
    Ok(curves)
}

const SETTING: &str = "sampling";

impl SamplingCurve {
    pub fn to_rows(&self, n_users: usize) -> Vec<ReportRow> {
        let (model, feature) = (self.method.model.name(), self.method.feature.name());
        let row = |key: &str, v: f64, c: usize, rep: Option<usize>| {
            ReportRow::new(SETTING, model, feature, key, "pearson_r", v, n_users).with_sample(c, rep)
        };
        let mut rows = Vec::new();
        for p in &self.points {
            for (s, rep) in p.replicates.iter().enumerate() {
                for (t, v) in rep.iter() {
                    rows.push(row(t.key(), *v, p.tweet_count, Some(s)));
                }
                rows.push(row("mean", rep.mean(), p.tweet_count, Some(s)));
            }
            for (t, v) in p.per_trait.iter() {
                rows.push(row(t.key(), *v, p.tweet_count, None));
            }
            rows.push(row("mean", p.mean_r, p.tweet_count, None));
        }
        rows
    }

    /// Rebuilds curves from sampling rows, in order of first appearance.
    pub fn from_rows(rows: &[ReportRow]) -> Result<Vec<SamplingCurve>> {
        let bad = |msg: String| Error::Parse {
            what: "report",
            line: 0,
            message: msg,
        };
        let mut curves: Vec<SamplingCurve> = Vec::new();
        for r in rows.iter().filter(|r| r.setting == SETTING) {
            let method = Method::new(r.feature.parse()?, r.method.parse()?);
            let c = r.tweet_count.ok_or_else(|| bad("sampling row without tweet_count".into()))?;
            let ci = match curves.iter().position(|x| x.method == method) {
                Some(i) => i,
                None => {
                    curves.push(SamplingCurve { method, points: Vec::new() });
                    curves.len() - 1
                }
            };
            let points = &mut curves[ci].points;
            let pi = match points.iter().position(|p| p.tweet_count == c) {
                Some(i) => i,
                None => {
                    points.push(SamplingPoint {
                        tweet_count: c,
                        mean_r: f64::NAN,
                        per_trait: Big5::default(),
                        replicates: Vec::new(),
                    });
                    points.len() - 1
                }
            };
            let p = &mut points[pi];
            let t = Trait::from_key(&r.trait_key);
            match (r.replicate, t) {
                (Some(s), Some(t)) => {
                    if p.replicates.len() <= s {
                        p.replicates.resize(s + 1, Big5::default());
                    }
                    *p.replicates[s].get_mut(t) = r.value;
                }
                (Some(_), None) => {}
                (None, Some(t)) => *p.per_trait.get_mut(t) = r.value,
                (None, None) if r.trait_key == "mean" => p.mean_r = r.value,
                (None, None) => return Err(bad(format!("unknown trait {:?}", r.trait_key))),
            }
        }
        Ok(curves)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, synthetic_table, SyntheticConfig};
    use crate::eval::run_full_setting;
    use crate::features::FeatureKind;
    use crate::models::ModelKind;

    #[test]
    fn subset_seeds_are_coordinate_functions() {
        assert_eq!(subset_seed(1, "u", 10, 2), subset_seed(1, "u", 10, 2));
        assert_ne!(subset_seed(1, "u", 10, 2), subset_seed(1, "u", 10, 3));
        assert_ne!(subset_seed(1, "u", 10, 2), subset_seed(1, "v", 10, 2));
        assert_ne!(subset_seed(1, "u", 10, 2), subset_seed(2, "u", 10, 2));
        let idx = subset_indices(50, 10, 7);
        assert_eq!(idx.len(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subset_indices(5, 5, 3), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn full_count_matches_full_setting() {
        let table = synthetic_table(150, 5, 3).unwrap();
        let users = generate_synthetic(
            &table,
            &SyntheticConfig {
                n_users: 20,
                tweets_per_user: 12,
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let res = Resources::new(Some(&table), None);
        let mut cfg = EvalConfig::new(8);
        cfg.folds = 4;
        cfg.gp.restarts = 1;
        let methods = [
            Method::new(FeatureKind::Embedding, ModelKind::Ridge),
            Method::new(FeatureKind::Ngram, ModelKind::Gp),
        ];
        let sc = SamplingConfig {
            tweet_counts: vec![3, 12],
            n_subsets: 4,
            ..Default::default()
        };
        let curves = run_sampling_setting(&users, &methods, &res, &cfg, &sc).unwrap();
        let full = run_full_setting(&users, &methods, &res, &cfg).unwrap();
        for (curve, fm) in curves.iter().zip(&full.methods) {
            let last = curve.points.last().unwrap();
            let means = last.replicate_means();
            assert!(means.iter().all(|m| m.to_bits() == means[0].to_bits()));
            for t in Trait::ALL {
                assert_eq!(last.per_trait.get(t).to_bits(), fm.traits.get(t).pearson.r.to_bits());
            }
            assert_eq!(curve.points[0].replicates.len(), 4);
        }
        let rows: Vec<ReportRow> = curves.iter().flat_map(|c| c.to_rows(users.len())).collect();
        let per_method = rows.iter().filter(|r| r.replicate.is_some() && r.trait_key == "mean").count();
        assert_eq!(per_method, 2 * 2 * 4);
        assert_eq!(SamplingCurve::from_rows(&rows).unwrap(), curves);
    }

    #[test]
    fn rejects_bad_counts() {
        let table = synthetic_table(50, 3, 3).unwrap();
        let users = generate_synthetic(
            &table,
            &SyntheticConfig {
                n_users: 10,
                tweets_per_user: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let res = Resources::new(Some(&table), None);
        let m = [Method::new(FeatureKind::Embedding, ModelKind::Ridge)];
        let mut cfg = EvalConfig::new(0);
        cfg.folds = 2;
        let run = |counts: Vec<usize>| {
            run_sampling_setting(&users, &m, &res, &cfg, &SamplingConfig { tweet_counts: counts, ..Default::default() })
        };
        assert!(run(vec![6]).is_err());
        assert!(run(vec![3, 2]).is_err());
        assert!(run(vec![]).is_err());
        assert!(run(vec![2, 5]).is_ok());
    }
}
