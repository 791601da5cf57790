//! Kernel hyperparameter fitting by log-marginal-likelihood ascent.
//!
//! Ascent runs in log-parameter space inside a box. Search directions come
//! from a BFGS inverse-Hessian estimate (plain gradient on the first step or
//! whenever the estimate stops giving an ascent direction); steps are found by
//! Armijo backtracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gp::{standardize_targets, LmlProblem};
use super::kernel::KernelParams;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sq_dists, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub restarts: usize,
    pub ard: bool,
    pub max_iter: usize,
    /// Stop once the projected gradient's ∞-norm drops below this.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            restarts: 3,
            ard: false,
            max_iter: 200,
            grad_tol: 1e-5,
            seed: 0,
        }
    }
}

const LOG_VAR_MIN: f64 = -13.815510557964274; // ln 1e-6
const LOG_SIGNAL_MAX: f64 = 9.210340371976184; // ln 1e4
const LOG_NOISE_MAX: f64 = std::f64::consts::LN_10;
const LENGTH_RANGE: f64 = 6.907755278982137; // ln 1e3 around the data scale
const INIT_SCALES: [f64; 3] = [1.0, 0.5, 2.0];

/// Median distance between distinct training inputs; 1 when degenerate.
pub fn median_pairwise_distance(x: &Matrix) -> f64 {
    median_from_sq(&pairwise_sq_dists(x))
}

fn median_from_sq(d: &Matrix) -> f64 {
    let n = d.rows();
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| d[(i, j)].sqrt())
        .collect();
    if v.is_empty() {
        return 1.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, theta: &mut [f64]) {
        for ((t, lo), hi) in theta.iter_mut().zip(&self.lo).zip(&self.hi) {
            *t = t.clamp(*lo, *hi);
        }
    }

    /// Gradient with components pushing against an active bound removed.
    fn project(&self, theta: &[f64], g: &[f64]) -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(i, &gi)| {
                let at_lo = theta[i] <= self.lo[i] && gi < 0.0;
                let at_hi = theta[i] >= self.hi[i] && gi > 0.0;
                if at_lo || at_hi {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AscentTrace {
    pub params: KernelParams,
    pub lml: f64,
    pub initial_lml: f64,
    pub iterations: usize,
}

pub fn gp_optimize_hyperparams(x: &Matrix, y: &[f64], cfg: &GpConfig) -> Result<KernelParams> {
    Ok(gp_optimize_traced(x, y, cfg)?
        .into_iter()
        .flatten()
        .max_by(|a, b| a.lml.total_cmp(&b.lml))
        .ok_or_else(|| Error::Numerical("every hyperparameter restart failed".into()))?
        .params)
}

/// One entry per restart; `None` when that start could not be evaluated.
pub fn gp_optimize_traced(x: &Matrix, y: &[f64], cfg: &GpConfig) -> Result<Vec<Option<AscentTrace>>> {
    if cfg.restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::invalid("hyperparameter fit needs matching nonempty inputs"));
    }
    let (ys, _, _) = standardize_targets(y);
    let problem = LmlProblem::new(x, ys, cfg.ard);
    let scale = match problem.sq_dists() {
        Some(d) => median_from_sq(d),
        None => median_pairwise_distance(x),
    };
    let n_len = if cfg.ard { x.cols().max(1) } else { 1 };
    let log_scale = scale.ln();
    let mut lo = vec![LOG_VAR_MIN];
    let mut hi = vec![LOG_SIGNAL_MAX];
    lo.extend(std::iter::repeat_n(log_scale - LENGTH_RANGE, n_len));
    hi.extend(std::iter::repeat_n(log_scale + LENGTH_RANGE, n_len));
    lo.push(LOG_VAR_MIN);
    hi.push(LOG_NOISE_MAX);
    let bounds = Bounds { lo, hi };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|r| {
            let (mult, noise): (f64, f64) = match INIT_SCALES.get(r) {
                Some(&m) => (m, 0.1),
                None => (2f64.powf(rng.random_range(-2.0..2.0)), 10f64.powf(rng.random_range(-3.0..0.0))),
            };
            let mut theta = vec![0.0];
            theta.extend(std::iter::repeat_n((scale * mult).ln(), n_len));
            theta.push(noise.ln());
            bounds.clamp(&mut theta);
            theta
        })
        .collect();

    Ok(starts
        .into_iter()
        .map(|theta| ascend(&problem, theta, &bounds, cfg).ok())
        .collect())
}

fn ascend(problem: &LmlProblem<'_>, mut theta: Vec<f64>, bounds: &Bounds, cfg: &GpConfig) -> Result<AscentTrace> {
    let (mut f, g) = problem.evaluate(&theta, true)?;
    let mut g = g.expect("gradient");
    let initial = f;
    let dim = theta.len();
    let mut h = identity(dim);
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let pg = bounds.project(&theta, &g);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < cfg.grad_tol {
            break;
        }
        iterations += 1;
        let mut dir = matvec(&h, &pg);
        if dot(&dir, &pg) <= 0.0 {
            h = identity(dim);
            dir = pg.clone();
        }
        // keep the first trial step within one log unit per coordinate
        let max_step = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if max_step > 1.0 { 1.0 / max_step } else { 1.0 };

        let mut accepted = None;
        while t > 1e-10 {
            let mut trial: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            bounds.clamp(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let gain = dot(&g, &step);
            if gain <= 0.0 {
                t *= 0.5;
                continue;
            }
            if let Ok((ft, _)) = problem.evaluate(&trial, false) {
                if ft >= f + 1e-4 * gain {
                    accepted = Some((trial, ft, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, ft, step)) = accepted else {
            break;
        };
        let (ft2, gt) = problem.evaluate(&trial, true)?;
        debug_assert_eq!(ft.to_bits(), ft2.to_bits());
        let gt = gt.expect("gradient");
        // BFGS on −f: y = −(g_new − g_old)
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| b - a).collect();
        let sy = dot(&step, &yv);
        if sy > 1e-12 {
            bfgs_update(&mut h, &step, &yv, sy);
        }
        theta = trial;
        f = ft;
        g = gt;
    }
    Ok(AscentTrace {
        params: KernelParams::from_vec(&theta),
        lml: f,
        initial_lml: initial,
        iterations,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

fn matvec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
