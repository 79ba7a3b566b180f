//! Isolation forest.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Harmonic number H(k), summed exactly.
pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Average unsuccessful-search path length in a binary search tree of `m` keys.
pub fn c_factor(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        _ => 2.0 * harmonic(m - 1) - 2.0 * (m - 1) as f64 / m as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum INode {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        value: f64,
        left: Box<INode>,
        right: Box<INode>,
    },
}

impl INode {
    pub fn path_length(&self, row: &[f64]) -> f64 {
        let mut node = self;
        let mut depth = 0.0;
        loop {
            match node {
                INode::Leaf { size } => return depth + c_factor(*size),
                INode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

fn grow(x: &[Vec<f64>], rows: &[usize], depth: usize, limit: usize, r: &mut rng::Rng) -> INode {
    if depth >= limit || rows.len() <= 1 {
        return INode::Leaf { size: rows.len() };
    }
    let d = x[0].len();
    let spans: Vec<(usize, f64, f64)> = (0..d)
        .filter_map(|f| {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(x[i][f]), hi.max(x[i][f])));
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if spans.is_empty() {
        return INode::Leaf { size: rows.len() };
    }
    let (feature, lo, hi) = spans[r.random_range(0..spans.len())];
    let mut value = r.random_range(lo..hi);
    if value <= lo {
        value = lo + (hi - lo) / 2.0;
    }
    let (l, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] < value);
    INode::Split {
        feature,
        value,
        left: Box::new(grow(x, &l, depth + 1, limit, r)),
        right: Box::new(grow(x, &rr, depth + 1, limit, r)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub sample_size: usize,
    pub trees: Vec<INode>,
}

impl IsolationForest {
    pub fn fit(x: &[Vec<f64>], n_estimators: usize, max_samples: usize, seed: u64) -> IsolationForest {
        let n = x.len();
        let m = max_samples.min(n);
        let limit = (m as f64).log2().ceil().max(1.0) as usize;
        let trees = (0..n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::seeded(rng::derive(seed, t as u64));
                let mut rows = sample(&mut r, n, m).into_vec();
                rows.sort_unstable();
                grow(x, &rows, 0, limit, &mut r)
            })
            .collect();
        IsolationForest { sample_size: m, trees }
    }

    pub fn mean_path_length(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(m))`, in (0, 1].
    pub fn score(&self, row: &[f64]) -> f64 {
        2f64.powf(-self.mean_path_length(row) / c_factor(self.sample_size))
    }
}
