use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

/// Default λ grid: nine log-spaced values from 1e-4 to 1e4.
pub fn default_lambda_grid() -> Vec<f64> {
    (-4..=4).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.intercept + dot(&self.weights, x))
    }
}

/// Centered design shared by every target and every λ.
///
/// Tall problems solve the primal system `(XcᵀXc + λI)w = Xcᵀyc`; wide ones
/// the equivalent dual `w = Xcᵀ(XcXcᵀ + λI)⁻¹yc`.
pub struct RidgeProblem {
    xc: Matrix,
    x_mean: Vec<f64>,
    gram: Matrix,
    dual: bool,
}

impl RidgeProblem {
    pub fn new(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::invalid("ridge needs at least one row"));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ridge inputs must be finite"));
        }
        let n = x.rows() as f64;
        let mut x_mean = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for (m, v) in x_mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= n);
        let mut xc = x.clone();
        for r in 0..xc.rows() {
            for (v, m) in xc.row_mut(r).iter_mut().zip(&x_mean) {
                *v -= m;
            }
        }
        let dual = x.cols() > x.rows();
        let gram = if dual { xc.outer_gram() } else { xc.inner_gram() };
        Ok(RidgeProblem {
            xc,
            x_mean,
            gram,
            dual,
        })
    }

    pub fn fit(&self, y: &[f64], lambda: f64) -> Result<RidgeModel> {
        if y.len() != self.xc.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.xc.rows(),
                got: y.len(),
            });
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

        let mut a = self.gram.clone();
        let scale = a.diag_mean().abs().max(f64::MIN_POSITIVE);
        for i in 0..a.rows() {
            a[(i, i)] += lambda;
        }
        let singular = || {
            Error::Singular(format!(
                "ridge normal equations are singular at lambda = {lambda}; use lambda > 0"
            ))
        };
        let chol = Cholesky::new(&a).ok_or_else(singular)?;
        let l = chol.factor();
        let min_pivot = (0..a.rows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-12 * (scale + lambda) {
            return Err(singular());
        }
        let weights = if self.dual {
            self.xc.t_matvec(&chol.solve(&yc))
        } else {
            chol.solve(&self.xc.t_matvec(&yc))
        };
        let intercept = y_mean - dot(&weights, &self.x_mean);
        Ok(RidgeModel {
            weights,
            intercept,
            lambda,
        })
    }
}

pub fn ridge_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    RidgeProblem::new(x)?.fit(y, lambda)
}

/// λ with the lowest validation MSE; exact ties go to the smaller λ.
pub fn ridge_tune(x_train: &Matrix, y_train: &[f64], x_val: &Matrix, y_val: &[f64], grid: &[f64]) -> Result<f64> {
    let problem = RidgeProblem::new(x_train)?;
    tune_with(&problem, y_train, x_val, y_val, grid)
}

pub(crate) fn tune_with(problem: &RidgeProblem, y_train: &[f64], x_val: &Matrix, y_val: &[f64], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if x_val.rows() != y_val.len() || x_val.rows() == 0 {
        return Err(Error::invalid("validation rows and targets must match and be nonempty"));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &lambda in grid {
        let model = match problem.fit(y_train, lambda) {
            Ok(m) => m,
            Err(e @ Error::Singular(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut sse = 0.0;
        for (r, t) in y_val.iter().enumerate() {
            let d = model.predict(x_val.row(r))? - t;
            sse += d * d;
        }
        let mse = sse / y_val.len() as f64;
        let better = match best {
            None => true,
            Some((bl, bm)) => mse < bm || (mse == bm && lambda < bl),
        };
        if better {
            best = Some((lambda, mse));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| last_err.unwrap_or_else(|| Error::Numerical("no usable lambda".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let m = ridge_fit(&x, &[2.0, 4.0], 0.0).unwrap();
        assert!((m.predict(&[3.0]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn hand_normal_equations() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        let m = ridge_fit(&x, &[1.0, -1.0], 1.0).unwrap();
        assert!((m.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.predict(&[3.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shrinkage_limit() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![4.0, -1.0]]);
        let y = [1.0, 3.0, 8.0];
        let m = ridge_fit(&x, &y, 1e12).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((m.predict(&[10.0, 10.0]).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn singular_without_regularization() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        match ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0) {
            Err(Error::Singular(msg)) => assert!(msg.contains("lambda > 0")),
            other => panic!("{other:?}"),
        }
        assert!(ridge_fit(&x, &[1.0, 2.0, 3.0], 0.1).is_ok());
    }

    #[test]
    fn wide_dual_matches_primal() {
        // 3 rows, 5 columns: dual path; compare to an explicit primal solve
        let x = Matrix::from_rows(&[
            vec![1.0, 0.5, -0.2, 0.0, 2.0],
            vec![0.3, -1.0, 0.8, 1.5, 0.1],
            vec![-0.7, 0.2, 0.4, -0.3, 0.9],
        ]);
        let y = [0.5, -0.1, 0.9];
        let lambda = 0.3;
        let dual = ridge_fit(&x, &y, lambda).unwrap();
        let p = RidgeProblem::new(&x).unwrap();
        let mut a = p.xc.inner_gram();
        for i in 0..5 {
            a[(i, i)] += lambda;
        }
        let ym = y.iter().sum::<f64>() / 3.0;
        let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
        let w = Cholesky::new(&a).unwrap().solve(&p.xc.t_matvec(&yc));
        for (u, v) in dual.weights.iter().zip(&w) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn tuning() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = [1.0, 3.0, 5.0, 7.0];
        let xv = Matrix::from_rows(&[vec![4.0], vec![5.0]]);
        let yv = [9.0, 11.0];
        assert_eq!(ridge_tune(&x, &y, &xv, &yv, &[0.1]).unwrap(), 0.1);
        assert_eq!(ridge_tune(&x, &y, &xv, &yv, &default_lambda_grid()).unwrap(), 1e-4);
        assert!(ridge_tune(&x, &y, &xv, &yv, &[]).is_err());
        // a constant target leaves every λ with the same validation error
        let flat = [2.0; 4];
        assert_eq!(ridge_tune(&x, &flat, &xv, &[2.0, 2.0], &[10.0, 1.0, 100.0]).unwrap(), 1.0);
    }
}
