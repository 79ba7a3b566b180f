//! Minimum covariance determinant via FAST-MCD, with the usual consistency
//! correction and one reweighting step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng;

/// Candidate searches run on a subsample once the data is larger than this.
pub const SUBSAMPLE: usize = 600;
const KEEP_BEST: usize = 10;
const MAX_CSTEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcd {
    pub location: Vec<f64>,
    /// Row-major `p x p`.
    pub covariance: Vec<f64>,
    pub precision: Vec<f64>,
    /// Log-determinant of the raw h-subset covariance (before correction).
    pub raw_log_det: f64,
    /// Indices of the chosen h-subset, ascending.
    pub support: Vec<usize>,
}

pub(crate) struct Estimate {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

fn to_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j])
}

/// Maximum-likelihood mean and covariance of `rows`, or `None` when the
/// covariance is numerically singular.
pub(crate) fn estimate(x: &DMatrix<f64>, rows: &[usize]) -> Option<Estimate> {
    let p = x.ncols();
    let m = rows.len() as f64;
    let mut mean = DVector::zeros(p);
    for &i in rows {
        mean += x.row(i).transpose();
    }
    mean /= m;
    let mut cov = DMatrix::zeros(p, p);
    for &i in rows {
        let c = x.row(i).transpose() - &mean;
        cov += &c * c.transpose();
    }
    cov /= m;
    from_parts(mean, cov)
}

fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Option<Estimate> {
    let scale = cov.trace() / cov.nrows() as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(cov)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    if diag.iter().any(|&v| !(v * v > 1e-12 * scale)) {
        return None;
    }
    let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
    Some(Estimate { mean, chol, log_det })
}

pub(crate) fn mahalanobis_sq(est: &Estimate, row: &[f64]) -> f64 {
    let c = DVector::from_column_slice(row) - &est.mean;
    let z = est.chol.solve(&c);
    c.dot(&z)
}

fn closest(rows: &[Vec<f64>], est: &Estimate, pool: &[usize], h: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool.iter().map(|&i| (mahalanobis_sq(est, &rows[i]), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = d.into_iter().take(h).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

/// C-steps from `subset` until the determinant stops falling; at most `limit` steps.
fn c_steps(
    x: &DMatrix<f64>,
    rows: &[Vec<f64>],
    pool: &[usize],
    h: usize,
    mut subset: Vec<usize>,
    limit: usize,
) -> Option<(f64, Vec<usize>)> {
    let mut est = estimate(x, &subset)?;
    for _ in 0..limit {
        let next = closest(rows, &est, pool, h);
        if next == subset {
            break;
        }
        let Some(e) = estimate(x, &next) else { break };
        if e.log_det >= est.log_det - 1e-12 {
            if e.log_det < est.log_det {
                est = e;
                subset = next;
            }
            break;
        }
        est = e;
        subset = next;
    }
    Some((est.log_det, subset))
}

pub fn default_h(n: usize, p: usize) -> usize {
    (n + p).div_ceil(2)
}

impl Mcd {
    pub fn fit(rows: &[Vec<f64>], support_fraction: Option<f64>, n_starts: usize, seed: u64) -> Result<Mcd> {
        let n = rows.len();
        let p = rows[0].len();
        if n < p + 2 {
            return Err(Error::Precondition(format!("mcd needs more than {} rows for {p} features", p + 1)));
        }
        let h = match support_fraction {
            Some(f) => ((f * n as f64).ceil() as usize).clamp(p + 1, n),
            None => default_h(n, p),
        };
        let x = to_matrix(rows);
        let mut r = rng::seeded(seed);
        let all: Vec<usize> = (0..n).collect();
        let pool: Vec<usize> = if n > SUBSAMPLE {
            let mut s = sample(&mut r, n, SUBSAMPLE).into_vec();
            s.sort_unstable();
            s
        } else {
            all.clone()
        };
        let h_pool = if n > SUBSAMPLE {
            ((h as f64 / n as f64) * pool.len() as f64).ceil() as usize
        } else {
            h
        }
        .clamp(p + 1, pool.len());

        let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
        for _ in 0..n_starts {
            let mut picks = sample(&mut r, pool.len(), pool.len()).into_vec();
            let mut start: Vec<usize> = picks.drain(..p + 1).map(|k| pool[k]).collect();
            // grow degenerate starts until their covariance is invertible
            let mut est = estimate(&x, &start);
            while est.is_none() && !picks.is_empty() {
                start.push(pool[picks.remove(0)]);
                est = estimate(&x, &start);
            }
            let Some(est) = est else { continue };
            let subset = closest(rows, &est, &pool, h_pool);
            if let Some(c) = c_steps(&x, rows, &pool, h_pool, subset, 2) {
                if !found.iter().any(|f| f.1 == c.1) {
                    found.push(c);
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found.truncate(KEEP_BEST);

        let mut best: Option<(f64, Vec<usize>)> = None;
        for (_, subset) in found {
            let subset = if n > SUBSAMPLE {
                match estimate(&x, &subset) {
                    Some(e) => closest(rows, &e, &all, h),
                    None => continue,
                }
            } else {
                subset
            };
            if let Some(c) = c_steps(&x, rows, &all, h, subset, MAX_CSTEPS) {
                if best.as_ref().is_none_or(|b| c.0 < b.0) {
                    best = Some(c);
                }
            }
        }
        let Some((raw_log_det, support)) = best else {
            return Err(Error::Singular("every candidate h-subset has a singular covariance".into()));
        };

        let raw = estimate(&x, &support).ok_or_else(|| Error::Singular("raw covariance".into()))?;
        let chi = ChiSquared::new(p as f64).expect("p >= 1");
        let mut d2: Vec<f64> = rows.iter().map(|row| mahalanobis_sq(&raw, row)).collect();
        let mut sorted = d2.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let correction = median / chi.inverse_cdf(0.5);
        if correction > 0.0 {
            d2.iter_mut().for_each(|v| *v /= correction);
        }
        let cutoff = chi.inverse_cdf(0.975);
        let inliers: Vec<usize> = (0..n).filter(|&i| d2[i] <= cutoff).collect();
        let fin = estimate(&x, &inliers)
            .ok_or_else(|| Error::Singular("reweighted covariance is singular; the data may be degenerate".into()))?;
        let cov = fin.chol.l() * fin.chol.l().transpose();
        let precision = fin.chol.inverse();
        Ok(Mcd {
            location: fin.mean.iter().copied().collect(),
            covariance: cov.transpose().iter().copied().collect(),
            precision: precision.transpose().iter().copied().collect(),
            raw_log_det,
            support,
        })
    }

    /// Mahalanobis distance under the reweighted estimate.
    pub fn score(&self, row: &[f64]) -> f64 {
        let p = self.location.len();
        let c: Vec<f64> = row.iter().zip(&self.location).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for i in 0..p {
            for j in 0..p {
                q += c[i] * self.precision[i * p + j] * c[j];
            }
        }
        q.max(0.0).sqrt()
    }
}

/// Log-determinant of the ML covariance of `rows` restricted to `subset`.
pub fn subset_log_det(rows: &[Vec<f64>], subset: &[usize]) -> Option<f64> {
    estimate(&to_matrix(rows), subset).map(|e| e.log_det)
}
