//! IF-THEN rules read off a fitted decision tree, one per leaf.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Bound {
    /// `x <= value`
    Le { value: f64 },
    /// `x > value`
    Gt { value: f64 },
    /// `low < x <= high`
    Between { low: f64, high: f64 },
}

impl Bound {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Bound::Le { value } => x <= value,
            Bound::Gt { value } => x > value,
            Bound::Between { low, high } => x > low && x <= high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub name: String,
    pub bound: Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleClass {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: RuleClass,
    pub support: usize,
    pub purity: f64,
}

impl Rule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.bound.holds(row[c.feature]))
    }

    pub fn label(&self) -> u8 {
        u8::from(self.class == RuleClass::Positive)
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0');
    let s = s.strip_suffix('.').map_or(s.to_string(), |t| format!("{t}.0"));
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bound {
            Bound::Le { value } => write!(f, "{} ≤ {}", self.name, num(value)),
            Bound::Gt { value } => write!(f, "{} > {}", self.name, num(value)),
            Bound::Between { low, high } => write!(f, "{} < {} ≤ {}", num(low), self.name, num(high)),
        }
    }
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleClass::Positive => "Positive Class",
            RuleClass::Negative => "Negative Class",
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.conditions.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, " THEN {}", self.class)
    }
}

#[derive(Clone, Copy)]
struct Interval {
    low: Option<f64>,
    high: Option<f64>,
}

/// Rules in depth-first, left-first leaf order.
pub fn tree_rules(tree: &Tree, names: &[String]) -> Vec<Rule> {
    let mut out = Vec::new();
    let mut path: Vec<(usize, Interval)> = Vec::new();
    walk(tree, 0, names, &mut path, &mut out);
    out
}

fn walk(tree: &Tree, at: usize, names: &[String], path: &mut Vec<(usize, Interval)>, out: &mut Vec<Rule>) {
    match tree.nodes[at] {
        Node::Leaf { value, samples, counts } => {
            let class = if value >= 0.5 { RuleClass::Positive } else { RuleClass::Negative };
            let agree = if class == RuleClass::Positive { counts[1] } else { counts[0] };
            let conditions = path
                .iter()
                .map(|&(feature, iv)| Condition {
                    feature,
                    name: names[feature].clone(),
                    bound: match (iv.low, iv.high) {
                        (Some(low), Some(high)) => Bound::Between { low, high },
                        (None, Some(value)) => Bound::Le { value },
                        (Some(value), None) => Bound::Gt { value },
                        (None, None) => unreachable!("every path entry carries a bound"),
                    },
                })
                .collect();
            out.push(Rule {
                conditions,
                class,
                support: samples,
                purity: if samples == 0 { 0.0 } else { agree as f64 / samples as f64 },
            });
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            for (child, is_left) in [(left, true), (right, false)] {
                let saved = path.clone();
                let slot = match path.iter().position(|&(f, _)| f == feature) {
                    Some(i) => i,
                    None => {
                        path.push((feature, Interval { low: None, high: None }));
                        path.len() - 1
                    }
                };
                let iv = &mut path[slot].1;
                if is_left {
                    iv.high = Some(iv.high.map_or(threshold, |h| h.min(threshold)));
                } else {
                    iv.low = Some(iv.low.map_or(threshold, |l| l.max(threshold)));
                }
                walk(tree, child, names, path, out);
                *path = saved;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(0.12345), "0.1235");
        assert_eq!(num(2.0), "2.0");
        assert_eq!(num(-0.0), "0.0");
    }

    #[test]
    fn repeated_feature_merges_into_interval() {
        let leaf = |v: f64, n: usize| Node::Leaf {
            value: v,
            samples: n,
            counts: if v >= 0.5 { [0, n] } else { [n, 0] },
        };
        // x0 <= 0.5 ? (x0 <= 0.2 ? 0 : 1) : 0
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 4,
                    samples: 6,
                    counts: [4, 2],
                },
                Node::Split {
                    feature: 0,
                    threshold: 0.2,
                    left: 2,
                    right: 3,
                    samples: 4,
                    counts: [2, 2],
                },
                leaf(0.0, 2),
                leaf(1.0, 2),
                leaf(0.0, 2),
            ],
        };
        let rules = tree_rules(&tree, &["x".to_string()]);
        let text: Vec<String> = rules.iter().map(ToString::to_string).collect();
        assert_eq!(
            text,
            [
                "IF x ≤ 0.2 THEN Negative Class",
                "IF 0.2 < x ≤ 0.5 THEN Positive Class",
                "IF x > 0.5 THEN Negative Class"
            ]
        );
    }
}
