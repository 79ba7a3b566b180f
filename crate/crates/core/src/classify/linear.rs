//! Linear classifiers (logistic regression, linear SVM) and Gaussian naive
//! Bayes.
//!
//! Both linear models minimise `mean loss + penalty` with an accelerated
//! proximal gradient method. The l1 part of a penalty is handled by
//! soft-thresholding; the bias is never penalised. Hinge loss is not smooth,
//! so the SVM falls back to averaged subgradient steps for it.

use serde::{Deserialize, Serialize};

use crate::neural::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
    Elasticnet,
}

impl Penalty {
    /// (l1 weight, l2 weight) for strength `alpha`; the l2 term is
    /// `l2 / 2 * ||w||^2`.
    fn split(self, alpha: f64) -> (f64, f64) {
        match self {
            Penalty::L1 => (alpha, 0.0),
            Penalty::L2 => (0.0, alpha),
            Penalty::Elasticnet => (0.5 * alpha, 0.5 * alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmLoss {
    Hinge,
    SquaredHinge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub bias: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.bias + self.coefficients.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    pub penalty: Penalty,
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Upper bound on the curvature of the mean loss, with `c` the loss's
/// second-derivative bound (1/4 for logistic, 2 for squared hinge).
fn lipschitz(x: &[Vec<f64>], c: f64) -> f64 {
    let n = x.len() as f64;
    let mean_sq: f64 = x.iter().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n;
    c * mean_sq
}

/// FISTA with gradient restart over `[bias, w...]`.
fn proximal_descent(
    x: &[Vec<f64>],
    d: usize,
    curvature: f64,
    params: &SolverParams,
    grad: &dyn Fn(&[f64], &mut [f64]),
) -> Vec<f64> {
    let (l1, l2) = params.penalty.split(params.alpha);
    let step = 1.0 / (lipschitz(x, curvature) + l2);
    let mut w = vec![0.0; d + 1];
    let mut y = w.clone();
    let mut g = vec![0.0; d + 1];
    let mut t = 1.0f64;
    for _ in 0..params.max_iter {
        grad(&y, &mut g);
        for j in 1..=d {
            g[j] += l2 * y[j];
        }
        let mut next = vec![0.0; d + 1];
        next[0] = y[0] - step * g[0];
        for j in 1..=d {
            next[j] = soft_threshold(y[j] - step * g[j], step * l1);
        }
        let moved: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // restart momentum when it points uphill
        let uphill: f64 = y.iter().zip(&next).zip(&w).map(|((yv, nv), wv)| (yv - nv) * (nv - wv)).sum();
        let t_next = if uphill > 0.0 { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for j in 0..=d {
            y[j] = next[j] + beta * (next[j] - w[j]);
        }
        w = next;
        t = t_next;
        // gradient-mapping norm
        if moved / step < params.tol {
            break;
        }
    }
    w
}

fn unpack(w: Vec<f64>) -> LinearModel {
    LinearModel {
        bias: w[0],
        coefficients: w[1..].to_vec(),
    }
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[u8], params: &SolverParams) -> LinearModel {
    let d = x[0].len();
    let n = x.len() as f64;
    let grad = |w: &[f64], g: &mut [f64]| {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (row, &label) in x.iter().zip(y) {
            let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
            let r = (sigmoid(z) - label as f64) / n;
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
    };
    unpack(proximal_descent(x, d, 0.25, params, &grad))
}

pub fn fit_svm(x: &[Vec<f64>], y: &[u8], loss: SvmLoss, params: &SolverParams) -> LinearModel {
    let d = x[0].len();
    let n = x.len() as f64;
    let sign = |label: u8| if label == 1 { 1.0 } else { -1.0 };
    match loss {
        SvmLoss::SquaredHinge => {
            let grad = |w: &[f64], g: &mut [f64]| {
                g.iter_mut().for_each(|v| *v = 0.0);
                for (row, &label) in x.iter().zip(y) {
                    let s = sign(label);
                    let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
                    let slack = 1.0 - s * z;
                    if slack > 0.0 {
                        let r = -2.0 * s * slack / n;
                        g[0] += r;
                        for (gj, xj) in g[1..].iter_mut().zip(row) {
                            *gj += r * xj;
                        }
                    }
                }
            };
            unpack(proximal_descent(x, d, 2.0, params, &grad))
        }
        SvmLoss::Hinge => unpack(hinge_subgradient(x, y, params)),
    }
}

/// Full-batch subgradient descent with step `eta0 / sqrt(t)` and iterate
/// averaging over the second half of the run.
fn hinge_subgradient(x: &[Vec<f64>], y: &[u8], params: &SolverParams) -> Vec<f64> {
    let d = x[0].len();
    let n = x.len() as f64;
    let (l1, l2) = params.penalty.split(params.alpha);
    let eta0 = 1.0 / lipschitz(x, 1.0).sqrt();
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut averaged = 0usize;
    let mut g = vec![0.0; d + 1];
    let iters = params.max_iter.max(1);
    for t in 0..iters {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (row, &label) in x.iter().zip(y) {
            let s = if label == 1 { 1.0 } else { -1.0 };
            let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
            if s * z < 1.0 {
                g[0] -= s / n;
                for (gj, xj) in g[1..].iter_mut().zip(row) {
                    *gj -= s * xj / n;
                }
            }
        }
        for j in 1..=d {
            g[j] += l2 * w[j] + l1 * w[j].signum() * (w[j] != 0.0) as u8 as f64;
        }
        let eta = eta0 / ((t + 1) as f64).sqrt();
        for j in 0..=d {
            w[j] -= eta * g[j];
        }
        if t >= iters / 2 {
            averaged += 1;
            for j in 0..=d {
                avg[j] += (w[j] - avg[j]) / averaged as f64;
            }
        }
    }
    avg
}

/// Gaussian naive Bayes with per-class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class 0, 1.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub const VARIANCE_FLOOR: f64 = 1e-9;

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[u8]) -> GaussianNb {
        let d = x[0].len();
        let mut count = [0usize; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        for (row, &c) in x.iter().zip(y) {
            let c = c as usize;
            count[c] += 1;
            for j in 0..d {
                means[c][j] += row[j];
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= count[c] as f64);
        }
        for (row, &c) in x.iter().zip(y) {
            let c = c as usize;
            for j in 0..d {
                variances[c][j] += (row[j] - means[c][j]).powi(2);
            }
        }
        for c in 0..2 {
            variances[c].iter_mut().for_each(|v| *v = (*v / count[c] as f64).max(VARIANCE_FLOOR));
        }
        let n = x.len() as f64;
        GaussianNb {
            priors: [count[0] as f64 / n, count[1] as f64 / n],
            means,
            variances,
        }
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let ll: f64 = row
            .iter()
            .zip(&self.means[c])
            .zip(&self.variances[c])
            .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
            .sum();
        self.priors[c].ln() + ll
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let (a, b) = (self.log_joint(0, row), self.log_joint(1, row));
        sigmoid(b - a)
    }
}
