//! Exact Gaussian process regression.
//!
//! Targets are standardized before fitting (zero mean, unit variance) and the
//! prior mean is zero on that scale; predictions are mapped back.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernel::{covariance, KernelParams};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

/// Population mean and standard deviation; a zero spread is reported as 1.
pub(crate) fn target_scale(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let std = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
    (mean, std)
}

pub(crate) fn standardize_targets(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let (mean, std) = target_scale(y);
    (y.iter().map(|v| (v - mean) / std).collect(), mean, std)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpRepr {
    params: KernelParams,
    x: Matrix,
    y_mean: f64,
    y_std: f64,
    jitter: f64,
    alpha: Vec<f64>,
    alpha_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpRepr", into = "GpRepr")]
pub struct GpModel {
    params: KernelParams,
    /// Shared between the trait models of one bundle.
    x: Arc<Matrix>,
    y_mean: f64,
    y_std: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

fn alpha_digest(alpha: &[f64]) -> String {
    let mut h = Sha256::new();
    for a in alpha {
        h.update(a.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl From<GpModel> for GpRepr {
    fn from(m: GpModel) -> Self {
        GpRepr {
            alpha_sha256: alpha_digest(&m.alpha),
            jitter: m.chol.jitter(),
            params: m.params,
            x: Arc::unwrap_or_clone(m.x),
            y_mean: m.y_mean,
            y_std: m.y_std,
            alpha: m.alpha,
        }
    }
}

impl TryFrom<GpRepr> for GpModel {
    type Error = Error;
    fn try_from(r: GpRepr) -> Result<Self> {
        if alpha_digest(&r.alpha) != r.alpha_sha256 {
            return Err(Error::Bundle("GP dual weights fail their checksum".into()));
        }
        if r.alpha.len() != r.x.rows() {
            return Err(Error::Bundle("GP dual weights and inputs disagree in length".into()));
        }
        r.params.validate(r.x.cols())?;
        let k = covariance(&r.x, &r.params);
        let chol = Cholesky::with_jitter(&k, r.jitter).ok_or(Error::NotPositiveDefinite { jitter: r.jitter })?;
        Ok(GpModel {
            params: r.params,
            x: Arc::new(r.x),
            y_mean: r.y_mean,
            y_std: r.y_std,
            chol,
            alpha: r.alpha,
        })
    }
}

pub fn gp_fit(x: &Matrix, y: &[f64], p: &KernelParams) -> Result<GpModel> {
    gp_fit_shared(Arc::new(x.clone()), y, p)
}

pub(crate) fn gp_fit_shared(x: Arc<Matrix>, y: &[f64], p: &KernelParams) -> Result<GpModel> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "GP fit needs matching nonempty inputs ({} rows, {} targets)",
            x.rows(),
            y.len()
        )));
    }
    p.validate(x.cols())?;
    let (ys, y_mean, y_std) = standardize_targets(y);
    let k = covariance(&x, p);
    let chol = Cholesky::with_escalation(&k)?;
    let alpha = chol.solve(&ys);
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("non-finite GP dual weights".into()));
    }
    Ok(GpModel {
        params: p.clone(),
        x,
        y_mean,
        y_std,
        chol,
        alpha,
    })
}

impl GpModel {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn inputs(&self) -> &Matrix {
        &self.x
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn target_std(&self) -> f64 {
        self.y_std
    }

    /// Squared Euclidean distance from `q` to every training input.
    pub(crate) fn sq_dists_to(&self, q: &[f64]) -> Vec<f64> {
        (0..self.x.rows())
            .map(|i| self.x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect()
    }

    pub(crate) fn same_inputs(&self, other: &GpModel) -> bool {
        Arc::ptr_eq(&self.x, &other.x)
    }

    /// Points this model at `other`'s inputs when they are equal.
    pub(crate) fn share_inputs(&mut self, other: &GpModel) {
        if !self.same_inputs(other) && self.x == other.x {
            self.x = Arc::clone(&other.x);
        }
    }

    fn cross_cov_from_sq(&self, sq: &[f64]) -> Vec<f64> {
        let sf2 = self.params.signal_var();
        let inv_l2 = (-2.0 * self.params.log_length_scales[0]).exp();
        sq.iter().map(|d2| sf2 * (-0.5 * (d2 * inv_l2)).exp()).collect()
    }

    fn cross_cov(&self, q: &[f64]) -> Vec<f64> {
        if !self.params.is_ard() {
            return self.cross_cov_from_sq(&self.sq_dists_to(q));
        }
        let sf2 = self.params.signal_var();
        (0..self.x.rows())
            .map(|i| sf2 * (-0.5 * self.params.scaled_sq_dist(self.x.row(i), q)).exp())
            .collect()
    }

    /// Posterior mean from precomputed [`Self::sq_dists_to`]; isotropic only.
    pub(crate) fn predict_mean_from_sq(&self, sq: &[f64]) -> f64 {
        debug_assert!(!self.params.is_ard());
        dot(&self.cross_cov_from_sq(sq), &self.alpha) * self.y_std + self.y_mean
    }

    /// Posterior mean and latent variance, both on the target scale.
    pub fn predict(&self, q: &[f64]) -> Result<(f64, f64)> {
        if q.len() != self.x.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.cols(),
                got: q.len(),
            });
        }
        let ks = self.cross_cov(q);
        let mean = dot(&ks, &self.alpha) * self.y_std + self.y_mean;
        let v = self.chol.solve_lower(&ks);
        let var = (self.params.signal_var() - dot(&v, &v)).max(0.0);
        Ok((mean, var * self.y_std * self.y_std))
    }

    pub fn predict_mean(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.x.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.cols(),
                got: q.len(),
            });
        }
        Ok(dot(&self.cross_cov(q), &self.alpha) * self.y_std + self.y_mean)
    }
}

pub fn gp_predict(m: &GpModel, x: &[f64]) -> Result<(f64, f64)> {
    m.predict(x)
}

/// Log marginal likelihood of the standardized targets and its gradient over
/// `[log σf², log ℓ…, log σn²]`.
pub fn gp_log_marginal_likelihood(p: &KernelParams, x: &Matrix, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::invalid("LML needs matching nonempty inputs"));
    }
    p.validate(x.cols())?;
    let (ys, _, _) = standardize_targets(y);
    let problem = LmlProblem::new(x, ys, p.is_ard());
    let (v, g) = problem.evaluate(&p.to_vec(), true)?;
    Ok((v, g.expect("gradient requested")))
}

/// Cached pieces of the LML surface for a fixed training set.
pub(crate) struct LmlProblem<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    /// Squared distances, isotropic kernels only.
    sq_dists: Option<Matrix>,
}

impl<'a> LmlProblem<'a> {
    pub(crate) fn new(x: &'a Matrix, y_standardized: Vec<f64>, ard: bool) -> Self {
        LmlProblem {
            x,
            y: y_standardized,
            sq_dists: (!ard).then(|| crate::linalg::pairwise_sq_dists(x)),
        }
    }

    pub(crate) fn sq_dists(&self) -> Option<&Matrix> {
        self.sq_dists.as_ref()
    }

    /// Signal part of the kernel, `σf²·exp(−r²/2)`.
    fn signal_cov(&self, p: &KernelParams) -> Matrix {
        let n = self.x.rows();
        let sf2 = p.signal_var();
        let mut k = Matrix::zeros(n, n);
        match &self.sq_dists {
            Some(d) => {
                let inv_l2 = (-2.0 * p.log_length_scales[0]).exp();
                for i in 0..n {
                    k[(i, i)] = sf2;
                    for j in 0..i {
                        let v = sf2 * (-0.5 * d[(i, j)] * inv_l2).exp();
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                    }
                }
            }
            None => {
                for i in 0..n {
                    k[(i, i)] = sf2;
                    for j in 0..i {
                        let v = sf2 * (-0.5 * p.scaled_sq_dist(self.x.row(i), self.x.row(j))).exp();
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                    }
                }
            }
        }
        k
    }

    pub(crate) fn evaluate(&self, theta: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let p = KernelParams::from_vec(theta);
        let n = self.x.rows();
        let kf = self.signal_cov(&p);
        let mut k = kf.clone();
        let sn2 = p.noise_var();
        for i in 0..n {
            k[(i, i)] += sn2;
        }
        let chol = Cholesky::with_escalation(&k)?;
        let alpha = chol.solve(&self.y);
        let value = -0.5 * dot(&self.y, &alpha) - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite log marginal likelihood".into()));
        }
        if !want_grad {
            return Ok((value, None));
        }

        // W = ααᵀ − K⁻¹; each component is ½·Σ W ∘ ∂K.
        let kinv = chol.inverse();
        let mut w = kinv;
        for i in 0..n {
            for j in 0..n {
                w[(i, j)] = alpha[i] * alpha[j] - w[(i, j)];
            }
        }
        let mut grad = vec![0.0; theta.len()];
        let mut g_sf = 0.0;
        for i in 0..n {
            for j in 0..n {
                g_sf += w[(i, j)] * kf[(i, j)];
            }
        }
        grad[0] = 0.5 * g_sf;
        match &self.sq_dists {
            Some(d) => {
                let inv_l2 = (-2.0 * p.log_length_scales[0]).exp();
                let mut g = 0.0;
                for i in 0..n {
                    for j in 0..i {
                        g += 2.0 * w[(i, j)] * kf[(i, j)] * d[(i, j)];
                    }
                }
                grad[1] = 0.5 * g * inv_l2;
            }
            None => {
                let dims = self.x.cols();
                let mut g = vec![0.0; dims];
                for i in 0..n {
                    let xi = self.x.row(i);
                    for j in 0..i {
                        let c = 2.0 * w[(i, j)] * kf[(i, j)];
                        if c == 0.0 {
                            continue;
                        }
                        for ((gd, a), b) in g.iter_mut().zip(xi).zip(self.x.row(j)) {
                            *gd += c * (a - b) * (a - b);
                        }
                    }
                }
                for (d, gd) in g.iter().enumerate() {
                    grad[1 + d] = 0.5 * gd * (-2.0 * p.log_length_scales[d]).exp();
                }
            }
        }
        let trace_w: f64 = (0..n).map(|i| w[(i, i)]).sum();
        *grad.last_mut().unwrap() = 0.5 * sn2 * trace_w;
        Ok((value, Some(grad)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let x = Matrix::from_rows(&[vec![0.0]]);
        let p = KernelParams::isotropic(0.7, 1.0, 0.3);
        let m = gp_fit(&x, &[0.42], &p).unwrap();
        assert_eq!(m.alpha(), &[0.0]);
        assert_eq!(m.predict_mean(&[0.0]).unwrap(), 0.42);
        assert_eq!(m.predict_mean(&[5.0]).unwrap(), 0.42);

        let (v, _) = gp_log_marginal_likelihood(&p, &x, &[0.42]).unwrap();
        assert!((v - (-0.5 * (2.0 * PI).ln())).abs() < 1e-12);
        assert!((v + 0.9189385332046727).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_need_jitter() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 0.0]]);
        let p = KernelParams::isotropic(1.0, 1.0, 0.0);
        let m = gp_fit(&x, &[0.1, 0.1, 0.9], &p).unwrap();
        assert!(m.cholesky().jitter() > 0.0);
        assert!((m.predict_mean(&[0.0, 0.0]).unwrap() - 0.9).abs() < 1e-3);
    }

    #[test]
    fn two_point_dense_oracle() {
        // (K + σn²I)α = ys with K = [[1, e^-½], [e^-½, 1]], σn² = 0.1, ys = [-1, 1]
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let p = KernelParams::isotropic(1.0, 1.0, 0.1);
        let m = gp_fit(&x, &[0.0, 1.0], &p).unwrap();
        let k01 = (-0.5f64).exp();
        let (a, b) = (1.1, k01);
        let det = a * a - b * b;
        let alpha = [(-a - b) / det, (-b * -1.0 + a * 1.0) / det];
        for (u, v) in m.alpha().iter().zip(alpha) {
            assert!((u - v).abs() < 1e-12);
        }
        let ks = [(-0.125f64).exp(), (-0.125f64).exp()];
        let mean = 0.5 + 0.5 * (ks[0] * alpha[0] + ks[1] * alpha[1]);
        // kᵀ(K+σn²I)⁻¹k with the explicit 2×2 inverse
        let quad = (ks[0] * (a * ks[0] - b * ks[1]) + ks[1] * (-b * ks[0] + a * ks[1])) / det;
        let var = (1.0 - quad) * 0.25;
        let (pm, pv) = m.predict(&[0.5]).unwrap();
        assert!((pm - mean).abs() < 1e-8);
        assert!((pv - var).abs() < 1e-8);
    }

    #[test]
    fn noiseless_interpolation_and_prior_reversion() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.5]]);
        let y = [0.3, -0.2, 1.1];
        let p = KernelParams::isotropic(1.0, 0.8, 1e-12);
        let m = gp_fit(&x, &y, &p).unwrap();
        for (i, t) in y.iter().enumerate() {
            assert!((m.predict_mean(x.row(i)).unwrap() - t).abs() < 1e-6);
        }
        let (mean, var) = m.predict(&[1e3]).unwrap();
        assert!((mean - m.target_mean()).abs() < 1e-12);
        assert!((var - m.target_std().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn lml_invariant_to_target_scaling() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.4], vec![1.3], vec![2.0]]);
        let y = [0.1, 0.5, -0.3, 0.9];
        let y2: Vec<f64> = y.iter().map(|v| 7.0 * v - 3.0).collect();
        let p = KernelParams::isotropic(1.2, 0.9, 0.05);
        let (a, ga) = gp_log_marginal_likelihood(&p, &x, &y).unwrap();
        let (b, gb) = gp_log_marginal_likelihood(&p, &x, &y2).unwrap();
        assert!((a - b).abs() < 1e-10);
        for (u, v) in ga.iter().zip(gb) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = gp_fit(&x, &[0.0, 1.0], &KernelParams::isotropic(1.0, 1.0, 0.1)).unwrap();
        assert!(m.predict(&[0.0]).is_err());
        assert!(gp_fit(&x, &[0.0], &KernelParams::isotropic(1.0, 1.0, 0.1)).is_err());
    }

    #[test]
    fn serde_round_trip_is_bitwise() {
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![-1.0, 0.7], vec![0.3, -0.4]]);
        let m = gp_fit(&x, &[0.2, 0.9, 0.4], &KernelParams::isotropic(0.8, 1.3, 0.02)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: GpModel = serde_json::from_str(&json).unwrap();
        for q in [[0.0, 0.0], [1.0, -2.0], [0.1, 0.2]] {
            let (a, b) = (m.predict(&q).unwrap(), back.predict(&q).unwrap());
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        let tampered = json.replacen("\"alpha\":[", "\"alpha\":[1.0,", 1);
        assert!(serde_json::from_str::<GpModel>(&tampered).is_err());
    }
}
