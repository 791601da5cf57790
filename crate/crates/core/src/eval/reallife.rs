use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::report::ReportRow;
use super::{cache_features, features_for, preprocess_all, EvalConfig, Method, Resources};
use crate::corpus::{Big5, Trait, TraitScores, UserRecord};
use crate::error::{Error, Result};
use crate::models::ValidationSplit;
use crate::stats::{anova_oneway, paired_ttest, AnovaResult, TTestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLifeMethod {
    pub method: Method,
    /// Mean over test users of the trait-averaged absolute error.
    pub mae: f64,
    pub per_trait_mae: Big5<f64>,
    /// Trait-averaged absolute error of each test user, in test order.
    pub user_errors: Vec<f64>,
    pub predictions: Vec<TraitScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLifeReport {
    pub methods: Vec<RealLifeMethod>,
    pub n_test: usize,
    pub anova: AnovaResult,
    /// Indices into `methods` of the lowest and second-lowest MAE.
    pub best: (usize, usize),
    /// Best minus runner-up, paired by user.
    pub ttest: TTestResult,
}

/// Trains every method once on `train` and scores it on `test`.
pub fn run_reallife_setting(
    train: &[UserRecord],
    test: &[UserRecord],
    methods: &[Method],
    res: &Resources<'_>,
    cfg: &EvalConfig,
) -> Result<RealLifeReport> {
    if methods.len() < 2 {
        return Err(Error::invalid("the real-life comparison needs at least two methods"));
    }
    if test.len() < 2 {
        return Err(Error::invalid("the real-life comparison needs at least two test users"));
    }
    let train_ids: HashSet<&str> = train.iter().map(|r| r.user_id.as_str()).collect();
    if let Some(r) = test.iter().find(|r| train_ids.contains(r.user_id.as_str())) {
        return Err(Error::invalid(format!("user {} appears in both corpora", r.user_id)));
    }
    let train_streams = preprocess_all(train, &cfg.clean);
    let test_streams = preprocess_all(test, &cfg.clean);
    let training: Vec<usize> = (0..train.len()).collect();
    let all_test: Vec<usize> = (0..test.len()).collect();
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let cached = cache_features(method.feature, res, &train_streams)?;
        let (featurizer, bundle) = super::train_on(
            method,
            train,
            &train_streams,
            cached.as_deref(),
            &training,
            ValidationSplit::ById {
                fraction: cfg.val_fraction,
                seed: cfg.seed,
            },
            res,
            cfg,
        )?;
        let x = features_for(&featurizer, &test_streams, None, &all_test)?;
        let predictions: Vec<TraitScores> = x.iter().map(|f| bundle.predict(f)).collect::<Result<_>>()?;
        let abs = |u: usize, t: Trait| (predictions[u].get(t) - test[u].traits.get(t)).abs();
        let user_errors: Vec<f64> = (0..test.len())
            .map(|u| Trait::ALL.iter().map(|&t| abs(u, t)).sum::<f64>() / 5.0)
            .collect();
        let per_trait_mae = Big5::from_fn(|t| (0..test.len()).map(|u| abs(u, t)).sum::<f64>() / test.len() as f64);
        out.push(RealLifeMethod {
            method,
            mae: user_errors.iter().sum::<f64>() / user_errors.len() as f64,
            per_trait_mae,
            user_errors,
            predictions,
        });
    }
    let groups: Vec<Vec<f64>> = out.iter().map(|m| m.user_errors.clone()).collect();
    let anova = anova_oneway(&groups)?;
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[a].mae.total_cmp(&out[b].mae).then(a.cmp(&b)));
    let best = (order[0], order[1]);
    let ttest = paired_ttest(&out[best.0].user_errors, &out[best.1].user_errors)?;
    Ok(RealLifeReport {
        methods: out,
        n_test: test.len(),
        anova,
        best,
        ttest,
    })
}

const SETTING: &str = "reallife";

impl RealLifeReport {
    pub fn to_rows(&self) -> Vec<ReportRow> {
        let n = self.n_test;
        let mut rows = Vec::new();
        for m in &self.methods {
            let (model, feature) = (m.method.model.name(), m.method.feature.name());
            for (t, v) in m.per_trait_mae.iter() {
                rows.push(ReportRow::new(SETTING, model, feature, t.key(), "mae", *v, n));
            }
            rows.push(ReportRow::new(SETTING, model, feature, "mean", "mae", m.mae, n));
        }
        let total = n * self.methods.len();
        let a = &self.anova;
        rows.push(ReportRow::new(SETTING, "", "", "mean", "anova_f", a.f, total).with_p(Some(a.p)));
        rows.push(ReportRow::new(SETTING, "", "", "mean", "anova_df_between", a.df_between as f64, total));
        rows.push(ReportRow::new(SETTING, "", "", "mean", "anova_df_within", a.df_within as f64, total));
        let pair = format!("{};{}", self.methods[self.best.0].method, self.methods[self.best.1].method);
        let t = &self.ttest;
        rows.push(ReportRow::new(SETTING, &pair, "", "mean", "ttest_t", t.t, n).with_p(Some(t.p)));
        rows.push(ReportRow::new(SETTING, &pair, "", "mean", "ttest_df", t.df as f64, n));
        if let Some(r) = t.r {
            rows.push(ReportRow::new(SETTING, &pair, "", "mean", "ttest_r", r, n));
        }
        rows
    }

    /// Rebuilds the summary numbers; per-user errors and predictions are not
    /// part of the CSV.
    pub fn from_rows(rows: &[ReportRow]) -> Result<RealLifeReport> {
        let bad = |msg: String| Error::Parse {
            what: "report",
            line: 0,
            message: msg,
        };
        let mut methods: Vec<RealLifeMethod> = Vec::new();
        let mut anova = AnovaResult {
            f: f64::NAN,
            df_between: 0,
            df_within: 0,
            p: f64::NAN,
        };
        let mut ttest = TTestResult {
            t: f64::NAN,
            df: 0,
            p: f64::NAN,
            r: None,
        };
        let mut pair = None;
        let mut n_test = 0;
        for r in rows.iter().filter(|r| r.setting == SETTING) {
            match r.metric.as_str() {
                "mae" => {
                    n_test = r.n;
                    let method = Method::new(r.feature.parse()?, r.method.parse()?);
                    let i = match methods.iter().position(|m| m.method == method) {
                        Some(i) => i,
                        None => {
                            methods.push(RealLifeMethod {
                                method,
                                mae: f64::NAN,
                                per_trait_mae: Big5::default(),
                                user_errors: Vec::new(),
                                predictions: Vec::new(),
                            });
                            methods.len() - 1
                        }
                    };
                    match Trait::from_key(&r.trait_key) {
                        Some(t) => *methods[i].per_trait_mae.get_mut(t) = r.value,
                        None => methods[i].mae = r.value,
                    }
                }
                "anova_f" => {
                    anova.f = r.value;
                    anova.p = r.p_value.ok_or_else(|| bad("anova row without p".into()))?;
                }
                "anova_df_between" => anova.df_between = r.value as usize,
                "anova_df_within" => anova.df_within = r.value as usize,
                "ttest_t" => {
                    ttest.t = r.value;
                    ttest.p = r.p_value.ok_or_else(|| bad("t-test row without p".into()))?;
                    let (a, b) = r
                        .method
                        .split_once(';')
                        .ok_or_else(|| bad(format!("bad method pair {:?}", r.method)))?;
                    pair = Some((a.parse::<Method>()?, b.parse::<Method>()?));
                }
                "ttest_df" => ttest.df = r.value as usize,
                "ttest_r" => ttest.r = Some(r.value),
                other => return Err(bad(format!("unknown metric {other:?}"))),
            }
        }
        let (a, b) = pair.ok_or_else(|| bad("missing t-test rows".into()))?;
        let find = |m: Method| {
            methods
                .iter()
                .position(|x| x.method == m)
                .ok_or_else(|| bad(format!("t-test names unknown method {m}")))
        };
        let best = (find(a)?, find(b)?);
        Ok(RealLifeReport {
            methods,
            n_test,
            anova,
            best,
            ttest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, synthetic_lexicon, synthetic_table, truncate_tweets, SyntheticConfig};
    use crate::features::FeatureKind;
    use crate::models::ModelKind;

    #[test]
    fn report_shape() {
        let table = synthetic_table(200, 6, 1).unwrap();
        let lex = synthetic_lexicon(&table, 8, 1).unwrap();
        let users = generate_synthetic(
            &table,
            &SyntheticConfig {
                n_users: 45,
                tweets_per_user: 30,
                seed: 6,
                ..Default::default()
            },
        )
        .unwrap();
        let (train, test) = users.split_at(30);
        let test = truncate_tweets(test, 8.0, 3.0, 1).unwrap();
        let res = Resources::new(Some(&table), Some(&lex));
        let mut cfg = EvalConfig::new(2);
        cfg.gp.restarts = 1;
        let methods = [
            Method::new(FeatureKind::Embedding, ModelKind::Gp),
            Method::new(FeatureKind::Lexicon, ModelKind::Ridge),
            Method::new(FeatureKind::Ngram, ModelKind::Ridge),
        ];
        let r = run_reallife_setting(train, &test, &methods, &res, &cfg).unwrap();
        assert_eq!((r.anova.df_between, r.anova.df_within), (2, 42));
        assert_eq!(r.ttest.df, 14);
        assert!(r.methods[r.best.0].mae <= r.methods[r.best.1].mae);
        for m in &r.methods {
            assert!((m.per_trait_mae.mean() - m.mae).abs() < 1e-12);
        }
        let back = RealLifeReport::from_rows(&r.to_rows()).unwrap();
        let mut orig = r.clone();
        orig.methods.iter_mut().for_each(|m| {
            m.user_errors.clear();
            m.predictions.clear();
        });
        assert_eq!(back, orig);

        assert!(run_reallife_setting(train, &train[..5], &methods, &res, &cfg).is_err());
        assert!(run_reallife_setting(train, &test, &methods[..1], &res, &cfg).is_err());
    }
}
