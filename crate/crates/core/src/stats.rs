//! Correlation, error and significance statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    /// Two-tailed; `None` below three points.
    pub p: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    /// Correlation between the paired series; `None` when undefined.
    pub r: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < min {
        return Err(Error::invalid(format!("need at least {min} paired values, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in statistic input"));
    }
    Ok(())
}

fn t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

pub fn pearson(pred: &[f64], actual: &[f64]) -> Result<PearsonResult> {
    check_pair(pred, actual, 2)?;
    let (mp, ma) = (mean(pred), mean(actual));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (p, a) in pred.iter().zip(actual) {
        let (dp, da) = (p - mp, a - ma);
        sxy += dp * da;
        sxx += dp * dp;
        syy += da * da;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a series is constant"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let n = pred.len();
    let p = (n >= 3).then(|| {
        if r.abs() == 1.0 {
            0.0
        } else {
            let df = (n - 2) as f64;
            t_two_tailed(r * (df / (1.0 - r * r)).sqrt(), df)
        }
    });
    Ok(PearsonResult { r, p, n })
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual, 1)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::invalid("ANOVA needs at least two groups"));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::invalid(format!("every ANOVA group needs at least 2 values, got {}", g.len())));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in ANOVA input"));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    if ssw == 0.0 {
        return Err(Error::ZeroVariance("within-group variance is zero"));
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let f = (ssb / df_between as f64) / (ssw / df_within as f64);
    let p = if f == 0.0 {
        1.0
    } else {
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64).expect("positive degrees of freedom");
        dist.sf(f).clamp(0.0, 1.0)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
    })
}

pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check_pair(a, b, 2)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let md = mean(&d);
    let var = d.iter().map(|v| (v - md) * (v - md)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance("paired differences are constant"));
    }
    let t = md / (var / n as f64).sqrt();
    let df = n - 1;
    let r = match pearson(a, b) {
        Ok(p) => Some(p.r),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TTestResult {
        t,
        df,
        p: t_two_tailed(t, df as f64),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().r - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().r + 1.0).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.r - 0.8).abs() < 1e-12);
        // t = 0.8·√(2/0.36) = 1.8856; two-tailed with 2 df
        let t: f64 = 0.8 * (2.0f64 / 0.36).sqrt();
        let p_hand = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((r.p.unwrap() - p_hand).abs() < 1e-10);
        assert_eq!(pearson(&[1.0, 2.0], &[2.0, 1.0]).unwrap().p, None);
        assert!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().p.unwrap() < 1e-6);
    }

    #[test]
    fn pearson_constant_series() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!((mae(&[0.2, 0.4], &[0.1, 0.7]).unwrap() - 0.2).abs() < 1e-15);
        assert!(mae(&[0.2], &[0.1, 0.7]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn anova_examples() {
        let a = anova_oneway(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.f, 0.0);
        assert_eq!(a.p, 1.0);
        let a = anova_oneway(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!((a.f - 2.0).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (1, 2));
        // F(1,2) tail equals the two-tailed t(2) tail at √F
        let t: f64 = 2f64.sqrt();
        assert!((a.p - (1.0 - t / (2.0 + t * t).sqrt())).abs() < 1e-10);
        let a = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![1.0, 5.0], vec![0.0, 2.0, 2.5, 9.0]]).unwrap();
        assert_eq!((a.df_between, a.df_within), (2, 6));
        assert!(matches!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]), Err(Error::ZeroVariance(_))));
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn ttest_examples() {
        assert!(paired_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).is_err());
        // d = [-1, 0, 1]: mean 0, so t = 0 and p = 1
        let t = paired_ttest(&[1.0, 2.0, 4.0], &[2.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.t, 0.0);
        assert_eq!(t.df, 2);
        assert!((t.p - 1.0).abs() < 1e-12);
        // d = [1, 2, 3, 6]: mean 3, sd √(14/3)
        let t = paired_ttest(&[2.0, 4.0, 6.0, 10.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((t.t - 3.0 / ((14.0f64 / 3.0) / 4.0).sqrt()).abs() < 1e-12);
        assert!(t.r.unwrap() > 0.9);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pearson_bounds_and_symmetry((x, y) in series()) {
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!(r.r.abs() <= 1.0);
                let p = r.p.unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!((pearson(&y, &x).unwrap().r - r.r).abs() < 1e-12);
            }
        }

        #[test]
        fn anova_nonnegative(g in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2..8), 2..5)) {
            if let Ok(a) = anova_oneway(&g) {
                prop_assert!(a.f >= 0.0);
                prop_assert!((0.0..=1.0).contains(&a.p));
            }
        }
    }
}
