//! CART trees stored as a flat node arena. Classification trees split on
//! gini or entropy decrease and keep the positive fraction at each leaf;
//! regression trees (used by boosting) split on squared-error decrease and
//! take their leaf values from a caller-supplied rule.
//!
//! A row goes left when `x[feature] <= threshold`. Thresholds are midpoints of
//! consecutive distinct sorted values. Equal gains keep the first candidate
//! found, i.e. the lowest feature index and then the lowest threshold.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        counts: [usize; 2],
    },
}

impl Node {
    pub fn samples(&self) -> usize {
        match *self {
            Node::Leaf { samples, .. } | Node::Split { samples, .. } => samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NestedNode", from = "NestedNode")]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn set_leaf_value(&mut self, at: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[at] {
            *value = v;
        }
    }
}

/// Nested on-disk form of a tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NestedNode {
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        counts: [usize; 2],
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
    Leaf {
        value: f64,
        samples: usize,
        counts: [usize; 2],
    },
}

impl From<Tree> for NestedNode {
    fn from(tree: Tree) -> Self {
        fn go(t: &Tree, at: usize) -> NestedNode {
            match t.nodes[at] {
                Node::Leaf { value, samples, counts } => NestedNode::Leaf { value, samples, counts },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                    counts,
                } => NestedNode::Split {
                    feature,
                    threshold,
                    samples,
                    counts,
                    left: Box::new(go(t, left)),
                    right: Box::new(go(t, right)),
                },
            }
        }
        go(&tree, 0)
    }
}

impl From<NestedNode> for Tree {
    fn from(root: NestedNode) -> Tree {
        fn go(n: NestedNode, nodes: &mut Vec<Node>) -> usize {
            let at = nodes.len();
            match n {
                NestedNode::Leaf { value, samples, counts } => nodes.push(Node::Leaf { value, samples, counts }),
                NestedNode::Split {
                    feature,
                    threshold,
                    samples,
                    counts,
                    left,
                    right,
                } => {
                    nodes.push(Node::Leaf {
                        value: 0.0,
                        samples,
                        counts,
                    });
                    let l = go(*left, nodes);
                    let r = go(*right, nodes);
                    nodes[at] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        samples,
                        counts,
                    };
                }
            }
            at
        }
        let mut nodes = Vec::new();
        go(root, &mut nodes);
        Tree { nodes }
    }
}

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: 5,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

pub fn impurity(criterion: Criterion, neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    if n <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (neg / n, pos / n);
    match criterion {
        Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
        Criterion::Entropy => [p0, p1].iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn sorted_by_feature(x: &[Vec<f64>], idx: &[usize], f: usize) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
    order
}

const GAIN_EPS: f64 = 1e-12;

/// Best classification split of the rows `idx` over `features` (ascending).
/// Zero-gain splits are allowed, which lets a tree separate XOR.
pub fn best_class_split(
    x: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
) -> Option<SplitChoice> {
    let n = idx.len() as f64;
    let pos = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
    let parent = impurity(criterion, n - pos, pos);
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let order = sorted_by_feature(x, idx, f);
        let (mut ln, mut lp) = (0.0, 0.0);
        for w in 0..order.len() - 1 {
            if y[order[w]] == 1 {
                lp += 1.0;
            } else {
                ln += 1.0;
            }
            let (a, b) = (x[order[w]][f], x[order[w + 1]][f]);
            if a == b {
                continue;
            }
            let nl = ln + lp;
            let (rn, rp) = (n - pos - ln, pos - lp);
            let gain = parent - nl / n * impurity(criterion, ln, lp) - (n - nl) / n * impurity(criterion, rn, rp);
            if best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(a, b),
                    gain,
                });
            }
        }
    }
    best
}

/// Best squared-error split for regression targets `r`.
pub fn best_regression_split(x: &[Vec<f64>], r: &[f64], idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let n = idx.len() as f64;
    let total: f64 = idx.iter().map(|&i| r[i]).sum();
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let order = sorted_by_feature(x, idx, f);
        let mut left_sum = 0.0;
        for w in 0..order.len() - 1 {
            left_sum += r[order[w]];
            let (a, b) = (x[order[w]][f], x[order[w + 1]][f]);
            if a == b {
                continue;
            }
            let nl = (w + 1) as f64;
            let nr = n - nl;
            let right_sum = total - left_sum;
            // decrease in total squared error, up to the constant parent term
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n;
            if best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(a, b),
                    gain,
                });
            }
        }
    }
    best
}

fn counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let pos = idx.iter().filter(|&&i| y[i] == 1).count();
    [idx.len() - pos, pos]
}

fn candidate_features(d: usize, params: &TreeParams, rng: &mut rng::Rng) -> Vec<usize> {
    match params.max_features {
        Some(m) if m < d => {
            let mut f = sample(rng, d, m.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    }
}

/// Grows a classification tree on the rows `idx` (duplicates allowed, as
/// produced by bootstrap sampling).
pub fn grow_classifier(x: &[Vec<f64>], y: &[u8], idx: &[usize], params: &TreeParams, seed: u64) -> Tree {
    let d = x.first().map_or(0, Vec::len);
    let mut rng = rng::seeded(seed);
    let mut nodes = Vec::new();
    let mut stack = vec![(idx.to_vec(), 0usize, usize::MAX, false)];
    while let Some((rows, depth, parent, is_left)) = stack.pop() {
        let c = counts(y, &rows);
        let at = nodes.len();
        let leaf = Node::Leaf {
            value: if rows.is_empty() { 0.0 } else { c[1] as f64 / rows.len() as f64 },
            samples: rows.len(),
            counts: c,
        };
        nodes.push(leaf);
        link(&mut nodes, parent, is_left, at);
        let pure = c[0] == 0 || c[1] == 0;
        if pure || depth >= params.max_depth || rows.len() < params.min_samples_split.max(2) {
            continue;
        }
        let features = candidate_features(d, params, &mut rng);
        let Some(split) = best_class_split(x, y, &rows, &features, params.criterion) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: usize::MAX,
            right: usize::MAX,
            samples: rows.len(),
            counts: c,
        };
        // right pushed first so the left subtree is numbered first
        stack.push((r, depth + 1, at, false));
        stack.push((l, depth + 1, at, true));
    }
    Tree { nodes }
}

/// Grows a regression tree on targets `r`; each leaf's value comes from
/// `leaf_value(rows_in_leaf)`.
pub fn grow_regressor(
    x: &[Vec<f64>],
    y: &[u8],
    r: &[f64],
    idx: &[usize],
    max_depth: usize,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let d = x.first().map_or(0, Vec::len);
    let features: Vec<usize> = (0..d).collect();
    let mut nodes = Vec::new();
    let mut stack = vec![(idx.to_vec(), 0usize, usize::MAX, false)];
    while let Some((rows, depth, parent, is_left)) = stack.pop() {
        let at = nodes.len();
        let c = counts(y, &rows);
        nodes.push(Node::Leaf {
            value: leaf_value(&rows),
            samples: rows.len(),
            counts: c,
        });
        link(&mut nodes, parent, is_left, at);
        let first = rows.first().map(|&i| r[i]);
        let constant = rows.iter().all(|&i| Some(r[i]) == first);
        if constant || depth >= max_depth || rows.len() < 2 {
            continue;
        }
        let Some(split) = best_regression_split(x, r, &rows, &features) else {
            continue;
        };
        let (lr, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: usize::MAX,
            right: usize::MAX,
            samples: rows.len(),
            counts: c,
        };
        stack.push((rr, depth + 1, at, false));
        stack.push((lr, depth + 1, at, true));
    }
    Tree { nodes }
}

fn link(nodes: &mut [Node], parent: usize, is_left: bool, child: usize) {
    if parent == usize::MAX {
        return;
    }
    if let Node::Split { left, right, .. } = &mut nodes[parent] {
        if is_left {
            *left = child;
        } else {
            *right = child;
        }
    }
}
