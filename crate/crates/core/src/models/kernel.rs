use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Squared-exponential kernel plus white noise, stored as logs.
///
/// `log_length_scales` holds one entry for the isotropic kernel or one per
/// input coordinate for ARD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_signal_var: f64,
    pub log_length_scales: Vec<f64>,
    pub log_noise_var: f64,
}

impl KernelParams {
    pub fn isotropic(signal_var: f64, length_scale: f64, noise_var: f64) -> Self {
        KernelParams {
            log_signal_var: signal_var.ln(),
            log_length_scales: vec![length_scale.ln()],
            log_noise_var: noise_var.ln(),
        }
    }

    pub fn ard(signal_var: f64, length_scales: &[f64], noise_var: f64) -> Self {
        KernelParams {
            log_signal_var: signal_var.ln(),
            log_length_scales: length_scales.iter().map(|l| l.ln()).collect(),
            log_noise_var: noise_var.ln(),
        }
    }

    pub fn signal_var(&self) -> f64 {
        self.log_signal_var.exp()
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise_var.exp()
    }

    pub fn length_scales(&self) -> Vec<f64> {
        self.log_length_scales.iter().map(|l| l.exp()).collect()
    }

    pub fn is_ard(&self) -> bool {
        self.log_length_scales.len() > 1
    }

    /// `[log σf², log ℓ…, log σn²]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.log_length_scales.len() + 2);
        v.push(self.log_signal_var);
        v.extend_from_slice(&self.log_length_scales);
        v.push(self.log_noise_var);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        KernelParams {
            log_signal_var: v[0],
            log_length_scales: v[1..v.len() - 1].to_vec(),
            log_noise_var: v[v.len() - 1],
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        let n = self.log_length_scales.len();
        if n == 0 || (n > 1 && n != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: n,
            });
        }
        let finite = self.log_signal_var.is_finite() && self.log_length_scales.iter().all(|l| l.is_finite());
        // zero noise (log = -inf) is allowed; the Cholesky jitter covers it
        let noise_ok = self.log_noise_var.is_finite() || self.log_noise_var == f64::NEG_INFINITY;
        if !finite || !noise_ok {
            return Err(Error::invalid("kernel parameters must be finite and positive"));
        }
        Ok(())
    }

    /// `Σ_d (a_d − b_d)² / ℓ_d²`
    pub(crate) fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.is_ard() {
            a.iter()
                .zip(b)
                .zip(&self.log_length_scales)
                .map(|((x, y), l)| (x - y) * (x - y) * (-2.0 * l).exp())
                .sum()
        } else {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            d2 * (-2.0 * self.log_length_scales[0]).exp()
        }
    }
}

pub fn rbf_kernel(x1: &[f64], x2: &[f64], p: &KernelParams) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            got: x2.len(),
        });
    }
    p.validate(x1.len())?;
    Ok(p.signal_var() * (-0.5 * p.scaled_sq_dist(x1, x2)).exp())
}

/// `K(X, X) + σn²·I`, without jitter.
pub(crate) fn covariance(x: &Matrix, p: &KernelParams) -> Matrix {
    let n = x.rows();
    let sf2 = p.signal_var();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = sf2 + p.noise_var();
        for j in 0..i {
            let v = sf2 * (-0.5 * p.scaled_sq_dist(x.row(i), x.row(j))).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
