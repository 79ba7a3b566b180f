//! Random forests and gradient-boosted trees.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, grow_regressor, Tree, TreeParams};
use crate::neural::sigmoid;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting positive.
    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict_value(row) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub struct ForestParams {
    pub estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

pub fn fit_forest(x: &[Vec<f64>], y: &[u8], params: &ForestParams, seed: u64) -> Forest {
    let n = x.len();
    let trees = (0..params.estimators)
        .into_par_iter()
        .map(|t| {
            let tree_seed = rng::derive(seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut r = rng::seeded(rng::derive(tree_seed, 0xb007));
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_classifier(x, y, &rows, &params.tree, tree_seed)
        })
        .collect();
    Forest { trees }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostLoss {
    Deviance,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub loss: BoostLoss,
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl Boosted {
    /// Additive score before the link function.
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_value(row)).sum::<f64>()
    }

    /// Raw score after each stage, starting with the initial score.
    pub fn staged_raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init;
        let mut out = vec![f];
        for t in &self.trees {
            f += self.learning_rate * t.predict_value(row);
            out.push(f);
        }
        out
    }

    pub fn probability(&self, raw: f64) -> f64 {
        match self.loss {
            BoostLoss::Deviance => sigmoid(raw),
            BoostLoss::Exponential => sigmoid(2.0 * raw),
        }
    }
}

pub struct BoostParams {
    pub loss: BoostLoss,
    pub learning_rate: f64,
    pub estimators: usize,
    pub max_depth: usize,
}

/// Newton-step boosting. Each stage fits a regression tree to the negative
/// gradient and replaces its leaf values with a one-step Newton estimate.
pub fn fit_boosted(x: &[Vec<f64>], y: &[u8], params: &BoostParams) -> Boosted {
    let n = x.len();
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let log_odds = (pos / (n as f64 - pos)).ln();
    let init = match params.loss {
        BoostLoss::Deviance => log_odds,
        BoostLoss::Exponential => 0.5 * log_odds,
    };
    let all: Vec<usize> = (0..n).collect();
    let mut f = vec![init; n];
    let mut trees = Vec::with_capacity(params.estimators);
    for _ in 0..params.estimators {
        let (resid, hess): (Vec<f64>, Vec<f64>) = match params.loss {
            BoostLoss::Deviance => f
                .iter()
                .zip(y)
                .map(|(&fi, &yi)| {
                    let p = sigmoid(fi);
                    (yi as f64 - p, p * (1.0 - p))
                })
                .unzip(),
            BoostLoss::Exponential => f
                .iter()
                .zip(y)
                .map(|(&fi, &yi)| {
                    let s = 2.0 * yi as f64 - 1.0;
                    let e = (-s * fi).exp();
                    (s * e, e)
                })
                .unzip(),
        };
        let leaf = |rows: &[usize]| {
            let num: f64 = rows.iter().map(|&i| resid[i]).sum();
            let den: f64 = rows.iter().map(|&i| hess[i]).sum();
            if den.abs() < 1e-150 {
                0.0
            } else {
                num / den
            }
        };
        let tree = grow_regressor(x, y, &resid, &all, params.max_depth, &leaf);
        for (fi, row) in f.iter_mut().zip(x) {
            *fi += params.learning_rate * tree.predict_value(row);
        }
        trees.push(tree);
    }
    Boosted {
        loss: params.loss,
        init,
        learning_rate: params.learning_rate,
        trees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_fraction_counts_positive_trees() {
        let stump = |v: f64| Tree {
            nodes: vec![super::super::tree::Node::Leaf {
                value: v,
                samples: 1,
                counts: [0, 1],
            }],
        };
        let f = Forest {
            trees: vec![stump(1.0), stump(0.9), stump(0.5), stump(0.2), stump(0.0)],
        };
        assert!((f.vote_fraction(&[0.0]) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn exponential_boosting_fits_a_line() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = fit_boosted(
            &x,
            &y,
            &BoostParams {
                loss: BoostLoss::Exponential,
                learning_rate: 0.1,
                estimators: 20,
                max_depth: 1,
            },
        );
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(u8::from(m.probability(m.raw_score(row)) >= 0.5), label);
        }
    }
}
