use serde::{Deserialize, Serialize};

use super::report::ReportRow;
use super::{cache_features, features_for, ids_digest, make_folds, preprocess_all, score, train_on, EvalConfig, Method, Resources, TraitMetrics};
use crate::corpus::{Big5, Trait, TraitScores, UserRecord};
use crate::error::{Error, Result};
use crate::features::{coverage_report, CoverageReport, CoverageSource, FeatureKind, Featurizer};
use crate::models::ValidationSplit;
use crate::stats::PearsonResult;

/// Pooled out-of-fold results of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub traits: Big5<TraitMetrics>,
    pub mean_r: f64,
    pub mean_mae: f64,
    /// Out-of-fold prediction for every user, in corpus order.
    pub predictions: Vec<TraitScores>,
}

/// What each fold's models were fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub method: Method,
    pub fold: usize,
    pub training_digest: String,
    pub test_digest: String,
    pub feature_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub methods: Vec<MethodResult>,
    /// Out-of-fold vocabulary coverage, one entry per feature set used.
    pub coverage: Vec<CoverageReport>,
    pub audits: Vec<FoldAudit>,
}

fn trait_means(traits: &Big5<TraitMetrics>) -> (f64, f64) {
    (
        traits.map(|_, m| m.pearson.r).mean(),
        traits.map(|_, m| m.mae).mean(),
    )
}

fn coverage_source<'a>(f: &'a Featurizer<'_>) -> CoverageSource<'a> {
    match f {
        Featurizer::Embedding(t, _) => CoverageSource::Embedding(t),
        Featurizer::Lexicon(l) => CoverageSource::Lexicon(l),
        Featurizer::Ngram(v) => CoverageSource::Ngram(v),
    }
}

fn add_coverage(acc: &mut Vec<CoverageReport>, r: CoverageReport) {
    match acc.iter_mut().find(|c| c.kind == r.kind) {
        Some(c) => {
            for (i, (m, t)) in r.matched.iter().zip(&r.total).enumerate() {
                c.matched[i] += m;
                c.total[i] += t;
            }
            c.fractions = c
                .matched
                .iter()
                .zip(&c.total)
                .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
                .collect();
        }
        None => acc.push(r),
    }
}

/// k-fold cross-validation over the whole corpus for every method; Pearson
/// and MAE are computed once over the pooled out-of-fold predictions.
pub fn run_full_setting(
    records: &[UserRecord],
    methods: &[Method],
    res: &Resources<'_>,
    cfg: &EvalConfig,
) -> Result<FullReport> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods to evaluate"));
    }
    let plan = make_folds(records.len(), cfg.folds, cfg.val_fraction, cfg.seed)?;
    let streams = preprocess_all(records, &cfg.clean);
    let mut coverage: Vec<CoverageReport> = Vec::new();
    let mut covered_kinds: Vec<FeatureKind> = Vec::new();
    let mut audits = Vec::new();
    let mut results = Vec::with_capacity(methods.len());
    for &method in methods {
        let cached = cache_features(method.feature, res, &streams)?;
        let mut preds: Vec<Option<TraitScores>> = vec![None; records.len()];
        let record_coverage = !covered_kinds.contains(&method.feature);
        for (fi, fold) in plan.folds.iter().enumerate() {
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
            let x_test = features_for(&featurizer, &streams, cached.as_deref(), &fold.test)?;
            for (&i, x) in fold.test.iter().zip(&x_test) {
                preds[i] = Some(bundle.predict(x)?);
            }
            if record_coverage {
                let test_streams: Vec<_> = fold.test.iter().map(|&i| streams[i].clone()).collect();
                add_coverage(&mut coverage, coverage_report(&test_streams, coverage_source(&featurizer))?);
            }
            audits.push(FoldAudit {
                method,
                fold: fi,
                training_digest: ids_digest(training.iter().map(|&i| records[i].user_id.as_str())),
                test_digest: ids_digest(fold.test.iter().map(|&i| records[i].user_id.as_str())),
                feature_fingerprint: bundle.fingerprint.clone(),
            });
        }
        if record_coverage {
            covered_kinds.push(method.feature);
        }
        let predictions: Vec<TraitScores> = preds
            .into_iter()
            .map(|p| p.ok_or_else(|| Error::Numerical("user without an out-of-fold prediction".into())))
            .collect::<Result<_>>()?;
        let traits = Big5::try_from_fn(|t| {
            let p: Vec<f64> = predictions.iter().map(|s| *s.get(t)).collect();
            let a: Vec<f64> = records.iter().map(|r| *r.traits.get(t)).collect();
            score(&p, &a)
        })?;
        let (mean_r, mean_mae) = trait_means(&traits);
        results.push(MethodResult {
            method,
            traits,
            mean_r,
            mean_mae,
            predictions,
        });
    }
    Ok(FullReport {
        methods: results,
        coverage,
        audits,
    })
}

const SETTING: &str = "full";

fn coverage_label(kind: FeatureKind, i: usize) -> String {
    match kind {
        FeatureKind::Ngram => format!("n{}", i + 1),
        _ => "all".into(),
    }
}

impl FullReport {
    pub fn to_rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for m in &self.methods {
            let (model, feature) = (m.method.model.name(), m.method.feature.name());
            for (t, tm) in m.traits.iter() {
                rows.push(
                    ReportRow::new(SETTING, model, feature, t.key(), "pearson_r", tm.pearson.r, tm.pearson.n)
                        .with_p(tm.pearson.p),
                );
                rows.push(ReportRow::new(SETTING, model, feature, t.key(), "mae", tm.mae, tm.pearson.n));
            }
            let n = m.traits.o.pearson.n;
            rows.push(ReportRow::new(SETTING, model, feature, "mean", "pearson_r", m.mean_r, n));
            rows.push(ReportRow::new(SETTING, model, feature, "mean", "mae", m.mean_mae, n));
        }
        for c in &self.coverage {
            for (i, (&f, &t)) in c.fractions.iter().zip(&c.total).enumerate() {
                rows.push(ReportRow::new(SETTING, "", c.kind.name(), &coverage_label(c.kind, i), "coverage", f, t));
            }
        }
        rows
    }

    /// Rebuilds the metric and coverage parts of a report from its rows;
    /// predictions and fold audits are not part of the CSV.
    pub fn from_rows(rows: &[ReportRow]) -> Result<FullReport> {
        let bad = |msg: String| Error::Parse {
            what: "report",
            line: 0,
            message: msg,
        };
        let mut methods: Vec<MethodResult> = Vec::new();
        let mut coverage: Vec<CoverageReport> = Vec::new();
        for r in rows.iter().filter(|r| r.setting == SETTING) {
            let feature: FeatureKind = r.feature.parse()?;
            if r.metric == "coverage" {
                let matched = (r.value * r.n as f64).round() as usize;
                match coverage.iter_mut().find(|c| c.kind == feature) {
                    Some(c) => {
                        c.fractions.push(r.value);
                        c.matched.push(matched);
                        c.total.push(r.n);
                    }
                    None => coverage.push(CoverageReport {
                        kind: feature,
                        fractions: vec![r.value],
                        matched: vec![matched],
                        total: vec![r.n],
                    }),
                }
                continue;
            }
            let method = Method::new(feature, r.method.parse()?);
            let idx = match methods.iter().position(|m| m.method == method) {
                Some(i) => i,
                None => {
                    let blank = TraitMetrics {
                        pearson: PearsonResult { r: f64::NAN, p: None, n: 0 },
                        mae: f64::NAN,
                    };
                    methods.push(MethodResult {
                        method,
                        traits: Big5::from_fn(|_| blank),
                        mean_r: f64::NAN,
                        mean_mae: f64::NAN,
                        predictions: Vec::new(),
                    });
                    methods.len() - 1
                }
            };
            let m = &mut methods[idx];
            match (r.trait_key.as_str(), r.metric.as_str()) {
                ("mean", "pearson_r") => m.mean_r = r.value,
                ("mean", "mae") => m.mean_mae = r.value,
                (key, metric) => {
                    let t = Trait::from_key(key).ok_or_else(|| bad(format!("unknown trait {key:?}")))?;
                    let tm = m.traits.get_mut(t);
                    match metric {
                        "pearson_r" => {
                            tm.pearson = PearsonResult {
                                r: r.value,
                                p: r.p_value,
                                n: r.n,
                            }
                        }
                        "mae" => tm.mae = r.value,
                        other => return Err(bad(format!("unknown metric {other:?}"))),
                    }
                }
            }
        }
        Ok(FullReport {
            methods,
            coverage,
            audits: Vec::new(),
        })
    }
}
