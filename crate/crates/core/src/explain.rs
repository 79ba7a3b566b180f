//! Shapley attribution with an interventional value function: the value of a
//! coalition S is the mean model output over background rows whose features
//! outside S are replaced by the instance's.
//!
//! Three estimators share that definition: full coalition enumeration,
//! permutation sampling, and a per-tree path walk for tree models.

use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{ModelState, TrainedModel};
use crate::classify::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::rng;

/// Exact enumeration visits 2^d coalitions.
pub const MAX_EXACT_FEATURES: usize = 15;
pub const DEFAULT_BACKGROUND: usize = 256;
pub const DEFAULT_PERMUTATIONS: usize = 1000;

/// Scalar model output being explained.
pub type OutputFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

/// The output each model's attributions add up to: the raw margin for
/// boosted trees, the positive-class probability (vote share for forests)
/// otherwise.
pub fn model_output(model: &TrainedModel) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |row: &[f64]| match &model.state {
        ModelState::Boosted(b) => b.raw_score(row),
        _ => model.proba_row(row).unwrap_or(f64::NAN),
    }
}

/// Up to `max` rows drawn without replacement, in their original order.
pub fn sample_background(rows: &[Vec<f64>], max: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= max {
        return rows.to_vec();
    }
    let mut idx = sample(&mut rng::seeded(seed), rows.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

fn check_inputs(instance: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::Precondition("the background set is empty".into()));
    }
    for row in background {
        if row.len() != instance.len() {
            return Err(Error::DimensionMismatch {
                expected: instance.len(),
                got: row.len(),
            });
        }
    }
    Ok(())
}

fn mean_output(f: &OutputFn, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
}

/// Mean output over the background with the features in `mask` taken from `instance`.
pub fn coalition_value(f: &OutputFn, instance: &[f64], background: &[Vec<f64>], mask: u32) -> f64 {
    let mut row = vec![0.0; instance.len()];
    let mut total = 0.0;
    for z in background {
        for j in 0..instance.len() {
            row[j] = if mask >> j & 1 == 1 { instance[j] } else { z[j] };
        }
        total += f(&row);
    }
    total / background.len() as f64
}

/// `s! (d - s - 1)! / d!`, the weight of a coalition of size `s` excluding the player.
pub fn shapley_weight(s: usize, d: usize) -> f64 {
    let mut binom = 1.0;
    for i in 0..s {
        binom = binom * (d - 1 - i) as f64 / (i + 1) as f64;
    }
    1.0 / (d as f64 * binom)
}

/// Exact Shapley values by enumerating every coalition.
pub fn shapley_exact(f: &OutputFn, instance: &[f64], background: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_inputs(instance, background)?;
    let d = instance.len();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::Precondition(format!(
            "exact enumeration supports at most {MAX_EXACT_FEATURES} features, got {d}"
        )));
    }
    let values: Vec<f64> = (0..1u32 << d)
        .into_par_iter()
        .map(|mask| coalition_value(f, instance, background, mask))
        .collect();
    let weights: Vec<f64> = (0..d).map(|s| shapley_weight(s, d)).collect();
    Ok((0..d)
        .map(|j| {
            let bit = 1u32 << j;
            (0..1u32 << d)
                .filter(|m| m & bit == 0)
                .map(|m| weights[m.count_ones() as usize] * (values[(m | bit) as usize] - values[m as usize]))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledShapley {
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

/// Permutation sampling. Each permutation adds the instance's features one
/// at a time to the whole background, so its marginal contributions sum to
/// `f(instance) - base` exactly.
pub fn shapley_sampling(
    f: &OutputFn,
    instance: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<SampledShapley> {
    check_inputs(instance, background)?;
    if n_permutations == 0 {
        return Err(Error::Config("n_permutations must be at least 1".into()));
    }
    let d = instance.len();
    let mut r = rng::seeded(seed);
    let orders: Vec<Vec<usize>> = (0..n_permutations)
        .map(|_| {
            let mut o: Vec<usize> = (0..d).collect();
            o.shuffle(&mut r);
            o
        })
        .collect();
    let contributions: Vec<Vec<f64>> = orders
        .par_iter()
        .map(|order| {
            let mut rows = background.to_vec();
            let mut prev = mean_output(f, &rows);
            let mut out = vec![0.0; d];
            for &j in order {
                for row in rows.iter_mut() {
                    row[j] = instance[j];
                }
                let next = mean_output(f, &rows);
                out[j] = next - prev;
                prev = next;
            }
            out
        })
        .collect();
    let n = n_permutations as f64;
    let mut values = vec![0.0; d];
    let mut standard_errors = vec![0.0; d];
    for j in 0..d {
        let mean = contributions.iter().map(|c| c[j]).sum::<f64>() / n;
        values[j] = mean;
        if n_permutations > 1 {
            let var = contributions.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            standard_errors[j] = (var / n).sqrt();
        }
    }
    Ok(SampledShapley {
        values,
        standard_errors,
    })
}

/// A tree, its weight, and the map from its leaf value to the payoff.
type TreePart<'a> = (&'a Tree, f64, fn(f64) -> f64);

/// Leaf payoff and weight for each tree of a model, in the units of [`model_output`].
fn tree_parts(model: &TrainedModel) -> Result<Vec<TreePart<'_>>> {
    fn identity(v: f64) -> f64 {
        v
    }
    fn vote(v: f64) -> f64 {
        if v >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
    Ok(match &model.state {
        ModelState::Tree(t) => vec![(t, 1.0, identity as fn(f64) -> f64)],
        ModelState::Forest(f) => {
            let w = 1.0 / f.trees.len() as f64;
            f.trees.iter().map(|t| (t, w, vote as fn(f64) -> f64)).collect()
        }
        ModelState::Boosted(b) => b.trees.iter().map(|t| (t, b.learning_rate, identity as fn(f64) -> f64)).collect(),
        _ => {
            return Err(Error::Unsupported(format!(
                "tree attribution needs a dt, rf or gbt model, got {}",
                model.kind
            )))
        }
    })
}

/// Role of a feature on the current path.
#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    Instance,
    Reference,
}

struct PathWalk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    z: &'a [f64],
    payoff: fn(f64) -> f64,
    weight: f64,
    side: Vec<Side>,
    from_x: Vec<usize>,
    from_z: Vec<usize>,
}

impl PathWalk<'_> {
    fn visit(&mut self, at: usize, out: &mut [f64]) {
        match self.tree.nodes[at] {
            Node::Leaf { value, .. } => {
                let v = self.weight * (self.payoff)(value);
                let (a, b) = (self.from_x.len(), self.from_z.len());
                if a > 0 {
                    let w = v * shapley_weight(a - 1, a + b);
                    for &i in &self.from_x {
                        out[i] += w;
                    }
                }
                if b > 0 {
                    let w = v * shapley_weight(a, a + b);
                    for &j in &self.from_z {
                        out[j] -= w;
                    }
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let go_x = if self.x[feature] <= threshold { left } else { right };
                let go_z = if self.z[feature] <= threshold { left } else { right };
                match self.side[feature] {
                    Side::Instance => self.visit(go_x, out),
                    Side::Reference => self.visit(go_z, out),
                    Side::Free if go_x == go_z => self.visit(go_x, out),
                    Side::Free => {
                        self.side[feature] = Side::Instance;
                        self.from_x.push(feature);
                        self.visit(go_x, out);
                        self.from_x.pop();
                        self.side[feature] = Side::Reference;
                        self.from_z.push(feature);
                        self.visit(go_z, out);
                        self.from_z.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

/// Exact interventional Shapley values for tree models in time linear in
/// the number of reachable leaves per background row.
pub fn tree_shap(model: &TrainedModel, instance: &[f64], background: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_inputs(instance, background)?;
    if instance.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: instance.len(),
        });
    }
    let parts = tree_parts(model)?;
    let d = instance.len();
    let mut out = vec![0.0; d];
    for z in background {
        for &(tree, weight, payoff) in &parts {
            let mut walk = PathWalk {
                tree,
                x: instance,
                z,
                payoff,
                weight,
                side: vec![Side::Free; d],
                from_x: Vec::new(),
                from_z: Vec::new(),
            };
            walk.visit(0, &mut out);
        }
    }
    let m = background.len() as f64;
    out.iter_mut().for_each(|v| *v /= m);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMethod {
    Exact,
    Sampling,
    Tree,
}

impl ExplainMethod {
    pub fn parse(s: &str) -> Result<ExplainMethod> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(ExplainMethod::Exact),
            "sampling" => Ok(ExplainMethod::Sampling),
            "tree" => Ok(ExplainMethod::Tree),
            other => Err(Error::Config(format!("unknown explain method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub feature_names: Vec<String>,
    /// Mean explained output over the background.
    pub base_value: f64,
    /// One row of attributions per explained instance.
    pub values: Vec<Vec<f64>>,
    /// Per-value standard errors, for the sampling estimator only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub standard_errors: Option<Vec<Vec<f64>>>,
}

/// Attributions for every row of `rows`.
pub fn explain(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    method: ExplainMethod,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapMatrix> {
    let d = model.n_features();
    if let Some(bad) = background.iter().chain(rows).find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if background.is_empty() {
        return Err(Error::Precondition("the background set is empty".into()));
    }
    let f = model_output(model);
    let base_value = mean_output(&f, background);
    let results: Vec<(Vec<f64>, Option<Vec<f64>>)> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(match method {
                ExplainMethod::Exact => (shapley_exact(&f, row, background)?, None),
                ExplainMethod::Tree => (tree_shap(model, row, background)?, None),
                ExplainMethod::Sampling => {
                    let s = shapley_sampling(&f, row, background, n_permutations, rng::derive(seed, i as u64))?;
                    (s.values, Some(s.standard_errors))
                }
            })
        })
        .collect::<Result<_>>()?;
    let (values, errors): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(ShapMatrix {
        feature_names: model.feature_names.clone(),
        base_value,
        values,
        standard_errors: (method == ExplainMethod::Sampling).then(|| errors.into_iter().flatten().collect()),
    })
}

/// Features ranked by mean absolute attribution, ties kept in feature order.
pub fn global_importance(shap: &ShapMatrix) -> Vec<(String, f64)> {
    let n = shap.values.len().max(1) as f64;
    let mut ranked: Vec<(String, f64)> = shap
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), shap.values.iter().map(|r| r[j].abs()).sum::<f64>() / n))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub feature: String,
    pub row: usize,
    pub shap_value: f64,
    pub feature_value: f64,
}

/// Long format: one record per (row, feature).
pub fn summary_export(shap: &ShapMatrix, instances: &[Vec<f64>]) -> Result<Vec<SummaryRecord>> {
    if shap.values.len() != instances.len() {
        return Err(Error::Data(format!(
            "{} attribution rows but {} instances",
            shap.values.len(),
            instances.len()
        )));
    }
    let mut out = Vec::with_capacity(instances.len() * shap.feature_names.len());
    for (i, (vals, x)) in shap.values.iter().zip(instances).enumerate() {
        if vals.len() != shap.feature_names.len() || x.len() != vals.len() {
            return Err(Error::DimensionMismatch {
                expected: shap.feature_names.len(),
                got: x.len().min(vals.len()),
            });
        }
        for (j, name) in shap.feature_names.iter().enumerate() {
            out.push(SummaryRecord {
                feature: name.clone(),
                row: i,
                shap_value: vals[j],
                feature_value: x[j],
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

pub fn feature_ranges(shap: &ShapMatrix) -> Vec<FeatureRange> {
    shap.feature_names
        .iter()
        .enumerate()
        .filter(|_| !shap.values.is_empty())
        .map(|(j, name)| FeatureRange {
            feature: name.clone(),
            min: shap.values.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min),
            max: shap.values.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(records: &[SummaryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "row", "shap_value", "feature_value"])?;
    for r in records {
        w.write_record([
            r.feature.clone(),
            r.row.to_string(),
            format!("{:.6}", r.shap_value),
            format!("{:.6}", r.feature_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// `feature,mean_abs_shap,min_shap,max_shap`, in importance order.
pub fn write_importance_csv<W: Write>(shap: &ShapMatrix, writer: W) -> Result<()> {
    let ranges = feature_ranges(shap);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "mean_abs_shap", "min_shap", "max_shap"])?;
    for (name, imp) in global_importance(shap) {
        let (lo, hi) = ranges
            .iter()
            .find(|r| r.feature == name)
            .map(|r| (r.min, r.max))
            .unwrap_or((0.0, 0.0));
        w.write_record([name, format!("{imp:.6}"), format!("{lo:.6}"), format!("{hi:.6}")])?;
    }
    w.flush().map_err(|e| Error::io("<importance>", e))?;
    Ok(())
}

impl ShapMatrix {
    /// Wide CSV: one column per feature, then the base value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push("base_value".into());
        w.write_record(&header)?;
        for row in &self.values {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            rec.push(format!("{:.6}", self.base_value));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<shap matrix>", e))?;
        Ok(())
    }
}

/// Average ranks, 1-based, with ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either column is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MergeNode {
    Feature {
        feature: String,
    },
    Merge {
        /// Average pairwise redundancy across the two groups.
        redundancy: f64,
        left: Box<MergeNode>,
        right: Box<MergeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Redundancy {
    pub features: Vec<String>,
    /// Symmetric, in [0, 1]; 1 means fully redundant.
    pub matrix: Vec<Vec<f64>>,
    pub tree: MergeNode,
}

/// Pairwise redundancy as |Spearman| between attribution columns, clustered
/// by average linkage with the most redundant groups merged first.
pub fn redundancy_distances(shap: &ShapMatrix) -> Result<Redundancy> {
    let d = shap.feature_names.len();
    if d < 2 {
        return Err(Error::Precondition("redundancy needs at least two features".into()));
    }
    if shap.values.len() < 3 {
        return Err(Error::Precondition("redundancy needs at least three attribution rows".into()));
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| shap.values.iter().map(|r| r[j]).collect()).collect();
    let mut matrix = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let r = spearman(&cols[i], &cols[j]).abs();
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    let mut clusters: Vec<(Vec<usize>, MergeNode)> = (0..d)
        .map(|j| {
            (
                vec![j],
                MergeNode::Feature {
                    feature: shap.feature_names[j].clone(),
                },
            )
        })
        .collect();
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::NEG_INFINITY);
        for p in 0..clusters.len() {
            for q in p + 1..clusters.len() {
                let (a, b) = (&clusters[p].0, &clusters[q].0);
                let link = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j))).map(|(i, j)| matrix[i][j]).sum::<f64>()
                    / (a.len() * b.len()) as f64;
                if link > best.2 {
                    best = (p, q, link);
                }
            }
        }
        let (p, q, link) = best;
        let (members_q, node_q) = clusters.remove(q);
        let (members_p, node_p) = std::mem::replace(
            &mut clusters[p],
            (
                Vec::new(),
                MergeNode::Feature {
                    feature: String::new(),
                },
            ),
        );
        let mut members = members_p;
        members.extend(members_q);
        clusters[p] = (
            members,
            MergeNode::Merge {
                redundancy: link,
                left: Box::new(node_p),
                right: Box::new(node_q),
            },
        );
    }
    Ok(Redundancy {
        features: shap.feature_names.clone(),
        matrix,
        tree: clusters.pop().map(|c| c.1).expect("d >= 2"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<Vec<f64>>) -> ShapMatrix {
        let d = values.first().map_or(2, |r| r.len());
        ShapMatrix {
            feature_names: (1..=d).map(|i| format!("f{i}")).collect(),
            base_value: 0.0,
            values,
            standard_errors: None,
        }
    }

    #[test]
    fn additive_model_attributions() {
        let f = |x: &[f64]| x[0] + x[1];
        let bg = vec![vec![-1.0, 2.0], vec![1.0, -2.0]];
        let phi = shapley_exact(&f, &[3.0, 5.0], &bg).unwrap();
        assert!((phi[0] - 3.0).abs() < 1e-12 && (phi[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_over_sizes() {
        for d in 1..10usize {
            let mut total = 0.0;
            for s in 0..d {
                let mut c = 1.0;
                for i in 0..s {
                    c = c * (d - 1 - i) as f64 / (i + 1) as f64;
                }
                total += c * shapley_weight(s, d);
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_permutation_telescopes() {
        let f = |x: &[f64]| x[0] * x[1] + x[2].sin();
        let bg = vec![vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5]];
        let x = [2.0, 3.0, -1.0];
        let s = shapley_sampling(&f, &x, &bg, 1, 9).unwrap();
        let base = (f(&bg[0]) + f(&bg[1])) / 2.0;
        assert!((s.values.iter().sum::<f64>() - (f(&x) - base)).abs() < 1e-12);
        let constant = |_: &[f64]| 4.0;
        let s = shapley_sampling(&constant, &x, &bg, 5, 9).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn importance_ranking() {
        let ranked = global_importance(&matrix(vec![vec![1.0, -2.0]]));
        assert_eq!(ranked, vec![("f2".to_string(), 2.0), ("f1".to_string(), 1.0)]);
        let ranked = global_importance(&matrix(vec![vec![0.0, 1.0, 0.5], vec![0.0, -1.0, 0.5]]));
        assert_eq!(ranked.last().unwrap(), &("f1".to_string(), 0.0));
    }

    #[test]
    fn summary_shapes() {
        let m = matrix(vec![vec![1.0, -2.0], vec![0.5, 3.0]]);
        let recs = summary_export(&m, &[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(recs.len(), 4);
        let ranges = feature_ranges(&m);
        assert_eq!(ranges[1].max - ranges[1].min, 5.0);
        let empty = ShapMatrix {
            values: vec![],
            ..m
        };
        assert!(summary_export(&empty, &[]).unwrap().is_empty());
        assert!(feature_ranges(&empty).is_empty());
    }

    #[test]
    fn redundancy_rules() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let a = (i as f64 * 1.3).sin();
                vec![a, a, 0.7, (i as f64 * 0.9).cos()]
            })
            .collect();
        let r = redundancy_distances(&matrix(rows)).unwrap();
        assert_eq!(r.matrix[0][1], 1.0);
        assert_eq!(r.matrix[0][2], 0.0);
        assert_eq!(r.matrix[2][3], 0.0);
        let MergeNode::Merge { .. } = &r.tree else { panic!() };
        let json = serde_json::to_string(&r.tree).unwrap();
        assert!(json.starts_with("{\"redundancy\""));
        assert!(redundancy_distances(&matrix(vec![vec![1.0]; 5])).is_err());
    }

    #[test]
    fn spearman_handles_ties() {
        assert!((spearman(&[1.0, 2.0, 2.0, 3.0], &[10.0, 20.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
