//! Dense row-major matrices and the Cholesky machinery shared by the
//! regressors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn diag_mean(&self) -> f64 {
        (0..self.rows).map(|i| self[(i, i)]).sum::<f64>() / self.rows as f64
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &w) in v.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += w * x;
            }
        }
        out
    }

    /// `self · selfᵀ` (rows × rows).
    pub fn outer_gram(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `selfᵀ · self` (cols × cols).
    pub fn inner_gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                let gi = &mut g.data[i * d..i * d + i + 1];
                for (gij, xj) in gi.iter_mut().zip(&row[..=i]) {
                    *gij += xi * xj;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g.data[j * d + i] = g.data[i * d + j];
            }
        }
        g
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product over the common length, summed in four lanes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean distances between all rows of `x`.
pub fn pairwise_sq_dists(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-2;

/// Lower-triangular factor `L` with `L·Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Factorizes without jitter.
    pub fn new(a: &Matrix) -> Option<Cholesky> {
        Self::with_jitter(a, 0.0)
    }

    pub fn with_jitter(a: &Matrix, jitter: f64) -> Option<Cholesky> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let mut d = a[(j, j)] + jitter - dot(lj, lj);
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            d = d.sqrt();
            l.data[j * n + j] = d;
            for i in j + 1..n {
                let (head, tail) = l.data.split_at_mut(i * n);
                let s = a[(i, j)] - dot(&tail[..j], &head[j * n..j * n + j]);
                tail[j] = s / d;
            }
        }
        Some(Cholesky { l, jitter })
    }

    /// Tries no jitter, then `JITTER_START·mean(diag)` growing tenfold up to
    /// `JITTER_MAX·mean(diag)`.
    pub fn with_escalation(a: &Matrix) -> Result<Cholesky> {
        if let Some(c) = Self::new(a) {
            return Ok(c);
        }
        let scale = a.diag_mean().abs().max(f64::MIN_POSITIVE);
        let mut rel = JITTER_START;
        let mut last = 0.0;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            last = rel * scale;
            if let Some(c) = Self::with_jitter(a, last) {
                return Ok(c);
            }
            rel *= 10.0;
        }
        Err(Error::NotPositiveDefinite { jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `L·x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `Lᵀ·x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[(i, i)];
            let xi = x[i];
            let row = self.l.row(i);
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    /// Solves `(L·Lᵀ)·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `(L·Lᵀ)⁻¹`, built from `L⁻¹`.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        // row j of `mt` is column j of L⁻¹ (zero before index j)
        let mut mt = Matrix::zeros(n, n);
        for j in 0..n {
            let x = &mut mt.data[j * n..(j + 1) * n];
            x[j] = 1.0 / self.l[(j, j)];
            for i in j + 1..n {
                let row = self.l.row(i);
                x[i] = -dot(&row[j..i], &x[j..i]) / row[i];
            }
        }
        // (L⁻¹)ᵀ L⁻¹
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&mt.row(i)[i..], &mt.row(j)[i..]);
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        inv
    }
}
