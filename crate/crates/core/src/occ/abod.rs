//! Angle-based outlier detection, fast variant over the k nearest neighbours.

use serde::{Deserialize, Serialize};

use crate::neighbors::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abod {
    pub k: usize,
    pub train: Vec<Vec<f64>>,
}

/// Population variance of `⟨x−y, x−z⟩ / (‖x−y‖² ‖x−z‖²)` over unordered
/// pairs drawn from `others`.
pub fn angle_variance(x: &[f64], others: &[&[f64]]) -> f64 {
    let diffs: Vec<(Vec<f64>, f64)> = others
        .iter()
        .map(|o| {
            let v: Vec<f64> = x.iter().zip(o.iter()).map(|(a, b)| a - b).collect();
            let n2 = v.iter().map(|t| t * t).sum();
            (v, n2)
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    for a in 0..diffs.len() {
        for b in a + 1..diffs.len() {
            let dot: f64 = diffs[a].0.iter().zip(&diffs[b].0).map(|(p, q)| p * q).sum();
            let v = dot / (diffs[a].1 * diffs[b].1);
            sum += v;
            sum_sq += v * v;
            count += 1.0;
        }
    }
    if count == 0.0 {
        return 0.0;
    }
    let mean = sum / count;
    (sum_sq / count - mean * mean).max(0.0)
}

impl Abod {
    pub fn fit(x: &[Vec<f64>], k: usize) -> Abod {
        Abod {
            k,
            train: x.to_vec(),
        }
    }

    /// The k nearest training rows at non-zero distance, ties to lower index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, t)| (squared_distance(row, t), i))
            .filter(|&(dist, _)| dist > 0.0)
            .collect();
        let k = self.k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn factor(&self, row: &[f64]) -> f64 {
        let nb: Vec<&[f64]> = self.neighbours(row).into_iter().map(|i| self.train[i].as_slice()).collect();
        angle_variance(row, &nb)
    }

    /// Negated angle variance: higher is more anomalous.
    pub fn score(&self, row: &[f64]) -> f64 {
        -self.factor(row)
    }
}
