//! Copula-based outlier detection from per-feature empirical tails.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Copod {
    /// Sorted training values per feature.
    pub columns: Vec<Vec<f64>>,
    pub skewness: Vec<f64>,
}

fn skew(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

impl Copod {
    pub fn fit(x: &[Vec<f64>]) -> Copod {
        let d = x[0].len();
        let mut columns = Vec::with_capacity(d);
        let mut skewness = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            skewness.push(skew(&col));
            col.sort_by(f64::total_cmp);
            columns.push(col);
        }
        Copod { columns, skewness }
    }

    /// `(-log left tail, -log right tail)` of `v` under feature `j`, with the
    /// (count + 1) / (n + 1) smoothing.
    pub fn tails(&self, j: usize, v: f64) -> (f64, f64) {
        let col = &self.columns[j];
        let n = col.len() as f64;
        let le = col.partition_point(|&t| t <= v) as f64;
        let ge = (col.len() - col.partition_point(|&t| t < v)) as f64;
        (-((le + 1.0) / (n + 1.0)).ln(), -((ge + 1.0) / (n + 1.0)).ln())
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let (mut left, mut right, mut skewed) = (0.0, 0.0, 0.0);
        for (j, &v) in row.iter().enumerate() {
            let (l, r) = self.tails(j, v);
            left += l;
            right += r;
            skewed += if self.skewness[j] < 0.0 { l } else { r };
        }
        left.max(right).max(skewed)
    }
}
