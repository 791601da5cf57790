//! Per-trait regressors: ridge regression and exact GP regression.

mod gp;
mod kernel;
mod optimize;
mod ridge;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Big5, Trait, TraitScores};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector, Standardizer};
use crate::linalg::Matrix;

pub use gp::{gp_fit, gp_log_marginal_likelihood, gp_predict, GpModel};
pub use kernel::{rbf_kernel, KernelParams};
pub use optimize::{gp_optimize_hyperparams, gp_optimize_traced, median_pairwise_distance, AscentTrace, GpConfig};
pub use ridge::{default_lambda_grid, ridge_fit, ridge_tune, RidgeModel, RidgeProblem};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gp,
    Ridge,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gp => "gp",
            ModelKind::Ridge => "ridge",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(ModelKind::Gp),
            "ridge" => Ok(ModelKind::Ridge),
            _ => Err(Error::invalid(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraitModel {
    Gp(GpModel),
    Ridge(RidgeModel),
}

impl TraitModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            TraitModel::Gp(m) => m.predict_mean(x),
            TraitModel::Ridge(m) => m.predict(x),
        }
    }

    /// Short description of the fitted hyperparameters.
    pub fn hyperparameters(&self) -> serde_json::Value {
        match self {
            TraitModel::Gp(m) => serde_json::json!({
                "signal_var": m.params().signal_var(),
                "length_scales": m.params().length_scales(),
                "noise_var": m.params().noise_var(),
                "jitter": m.cholesky().jitter(),
            }),
            TraitModel::Ridge(m) => serde_json::json!({ "lambda": m.lambda }),
        }
    }
}

/// How the training rows are split into fitting and validation parts for
/// ridge λ selection.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationSplit {
    /// `true` marks a validation row.
    Explicit(Vec<bool>),
    /// Rank users by a seeded hash of their id and hold out the first
    /// `round(fraction·n)`; independent of row order.
    ById { fraction: f64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub gp: GpConfig,
    pub lambda_grid: Vec<f64>,
    pub validation: ValidationSplit,
    /// Clamp predictions into `[0, 1]`.
    pub clamp: bool,
}

impl TrainConfig {
    pub fn new(model: ModelKind, seed: u64) -> Self {
        TrainConfig {
            model,
            gp: GpConfig {
                seed,
                ..Default::default()
            },
            lambda_grid: default_lambda_grid(),
            validation: ValidationSplit::ById {
                fraction: 0.25,
                seed,
            },
            clamp: false,
        }
    }
}

pub(crate) fn id_rank_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

fn validation_mask(ids: &[String], split: &ValidationSplit) -> Result<Vec<bool>> {
    match split {
        ValidationSplit::Explicit(mask) => {
            if mask.len() != ids.len() {
                return Err(Error::invalid("validation mask length differs from the training set"));
            }
            Ok(mask.clone())
        }
        ValidationSplit::ById { fraction, seed } => {
            if !(*fraction > 0.0 && *fraction < 1.0) {
                return Err(Error::invalid(format!("validation fraction must be in (0, 1), got {fraction}")));
            }
            let n_val = ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
            let mut order: Vec<(usize, [u8; 32])> = ids.iter().map(|id| id_rank_key(*seed, id)).enumerate().collect();
            order.sort_by_key(|a| a.1);
            let mut mask = vec![false; ids.len()];
            for (i, _) in order.into_iter().take(n_val) {
                mask[i] = true;
            }
            Ok(mask)
        }
    }
}

pub(crate) fn feature_matrix(features: &[FeatureVector]) -> Result<Matrix> {
    let d = features.first().map_or(0, |f| f.values.len());
    let mut data = Vec::with_capacity(features.len() * d);
    for f in features {
        if f.values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: f.values.len(),
            });
        }
        data.extend_from_slice(&f.values);
    }
    Ok(Matrix::from_vec(features.len(), d, data))
}

/// Five trained models over one standardized feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraitModelBundle {
    pub version: u32,
    pub method: ModelKind,
    pub feature_config: FeatureConfig,
    pub fingerprint: String,
    pub standardizer: Standardizer,
    pub clamp: bool,
    pub traits: Big5<TraitModel>,
}

pub fn train_big5(
    ids: &[String],
    features: &[FeatureVector],
    traits: &[TraitScores],
    feature_config: FeatureConfig,
    cfg: &TrainConfig,
) -> Result<TraitModelBundle> {
    if ids.len() != features.len() || features.len() != traits.len() {
        return Err(Error::invalid(format!(
            "misaligned training data: {} ids, {} feature vectors, {} trait rows",
            ids.len(),
            features.len(),
            traits.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::invalid("training needs at least two users"));
    }
    let x = feature_matrix(features)?;
    let standardizer = Standardizer::fit(&x)?;
    let z = standardizer.apply_matrix(&x)?;
    let target = |t: Trait| traits.iter().map(|s| *s.get(t)).collect::<Vec<f64>>();

    let models = match cfg.model {
        ModelKind::Ridge => {
            let mask = validation_mask(ids, &cfg.validation)?;
            let fit_rows: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
            let val_rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            if fit_rows.is_empty() || val_rows.is_empty() {
                return Err(Error::invalid("validation split left an empty side"));
            }
            let fit_problem = RidgeProblem::new(&z.select_rows(&fit_rows))?;
            let z_val = z.select_rows(&val_rows);
            let full_problem = RidgeProblem::new(&z)?;
            Big5::try_from_fn(|t| {
                let y = target(t);
                let pick = |rows: &[usize]| rows.iter().map(|&i| y[i]).collect::<Vec<f64>>();
                let lambda = ridge::tune_with(&fit_problem, &pick(&fit_rows), &z_val, &pick(&val_rows), &cfg.lambda_grid)?;
                Ok::<_, Error>(TraitModel::Ridge(full_problem.fit(&y, lambda)?))
            })?
        }
        ModelKind::Gp => {
            let shared = Arc::new(z);
            Big5::try_from_fn(|t| {
                let y = target(t);
                let params = gp_optimize_hyperparams(&shared, &y, &cfg.gp)?;
                Ok::<_, Error>(TraitModel::Gp(gp::gp_fit_shared(Arc::clone(&shared), &y, &params)?))
            })?
        }
    };
    Ok(TraitModelBundle {
        version: BUNDLE_VERSION,
        method: cfg.model,
        fingerprint: feature_config.fingerprint(),
        feature_config,
        standardizer,
        clamp: cfg.clamp,
        traits: models,
    })
}

impl TraitModelBundle {
    /// The five GP models when they are isotropic over one shared input set.
    fn shared_gp(&self) -> Option<Big5<&GpModel>> {
        let models = Big5::try_from_fn(|t| match self.traits.get(t) {
            TraitModel::Gp(g) if !g.params().is_ard() => Ok(g),
            _ => Err(()),
        })
        .ok()?;
        let shared = models.iter().all(|(_, g)| g.same_inputs(models.o));
        shared.then_some(models)
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<TraitScores> {
        let z = self.standardizer.apply(&features.values)?;
        let finish = |v: f64| if self.clamp { v.clamp(0.0, 1.0) } else { v };
        if let Some(models) = self.shared_gp() {
            if z.len() != models.o.inputs().cols() {
                return Err(Error::DimensionMismatch {
                    expected: models.o.inputs().cols(),
                    got: z.len(),
                });
            }
            let sq = models.o.sq_dists_to(&z);
            return Ok(models.map(|_, g| finish(g.predict_mean_from_sq(&sq))));
        }
        Big5::try_from_fn(|t| Ok(finish(self.traits.get(t).predict(&z)?)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut b: TraitModelBundle = serde_json::from_str(s)?;
        if let TraitModel::Gp(first) = &b.traits.o {
            let first = first.clone();
            for t in Trait::ALL {
                if let TraitModel::Gp(g) = b.traits.get_mut(t) {
                    g.share_inputs(&first);
                }
            }
        }
        if b.version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!("unsupported bundle version {}", b.version)));
        }
        if b.fingerprint != b.feature_config.fingerprint() {
            return Err(Error::Bundle("feature configuration does not match its fingerprint".into()));
        }
        for (t, m) in b.traits.iter() {
            let kind = match m {
                TraitModel::Gp(_) => ModelKind::Gp,
                TraitModel::Ridge(_) => ModelKind::Ridge,
            };
            if kind != b.method {
                return Err(Error::Bundle(format!("trait {t} holds a {kind} model in a {} bundle", b.method)));
            }
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
