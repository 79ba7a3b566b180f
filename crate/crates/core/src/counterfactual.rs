//! Counterfactual search: rows close to a query instance that the model
//! assigns to a different class, subject to mutability and range limits.
//!
//! Everything works in the model's encoded feature space. One-hot groups are
//! treated as a single categorical dimension. Distance is the mean over
//! dimensions of the range-scaled absolute difference (numeric) or a 0/1
//! mismatch (categorical).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{TrainedModel, THRESHOLD};
use crate::data::{argmax, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;
pub const DEFAULT_POPULATION: usize = 50;
pub const DEFAULT_GENERATIONS: usize = 100;
pub const TOURNAMENT: usize = 3;
pub const MUTATION_RATE: f64 = 0.2;
/// Numeric values closer than this count as unchanged.
pub const CHANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dim {
    Numeric {
        name: String,
        column: usize,
        low: f64,
        high: f64,
        mutable: bool,
    },
    Categorical {
        name: String,
        start: usize,
        categories: Vec<String>,
        mutable: bool,
    },
}

impl Dim {
    pub fn name(&self) -> &str {
        match self {
            Dim::Numeric { name, .. } | Dim::Categorical { name, .. } => name,
        }
    }

    pub fn mutable(&self) -> bool {
        match self {
            Dim::Numeric { mutable, .. } | Dim::Categorical { mutable, .. } => *mutable,
        }
    }

    fn category(&self, row: &[f64]) -> usize {
        match self {
            Dim::Categorical { start, categories, .. } => argmax(&row[*start..*start + categories.len()]),
            Dim::Numeric { .. } => unreachable!("numeric dimension has no category"),
        }
    }

    /// Distance contribution in [0, 1] for in-range numerics.
    fn gap(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Dim::Numeric { column, low, high, .. } => {
                let width = if high > low { high - low } else { 1.0 };
                (a[*column] - b[*column]).abs() / width
            }
            Dim::Categorical { .. } => f64::from(u8::from(self.category(a) != self.category(b))),
        }
    }

    fn changed(&self, a: &[f64], b: &[f64]) -> bool {
        match self {
            Dim::Numeric { column, .. } => (a[*column] - b[*column]).abs() > CHANGE_TOLERANCE,
            Dim::Categorical { .. } => self.category(a) != self.category(b),
        }
    }

    /// Coordinates whose L1 distance equals `gap`.
    fn scaled(&self, row: &[f64], out: &mut Vec<f64>) {
        match self {
            Dim::Numeric { column, low, high, .. } => {
                let width = if high > low { high - low } else { 1.0 };
                out.push(row[*column] / width);
            }
            Dim::Categorical { categories, .. } => {
                let c = self.category(row);
                out.extend((0..categories.len()).map(|k| if k == c { 0.5 } else { 0.0 }));
            }
        }
    }

    fn render(&self, row: &[f64]) -> String {
        match self {
            Dim::Numeric { column, .. } => format_number(row[*column]),
            Dim::Categorical { categories, .. } => categories[self.category(row)].clone(),
        }
    }
}

fn format_number(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

/// The model's feature space seen as counterfactual dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfSpace {
    pub width: usize,
    pub dims: Vec<Dim>,
}

impl CfSpace {
    /// Groups one-hot columns of an encoded schema. Numeric columns without
    /// a declared range take the min and max of `reference`.
    pub fn new(schema: &FeatureSchema, reference: &[Vec<f64>]) -> Result<CfSpace> {
        let width = schema.len();
        if let Some(r) = reference.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: r.len(),
            });
        }
        let mut dims = Vec::new();
        let mut j = 0;
        while j < width {
            let f = &schema.features[j];
            if let Some(src) = &f.one_hot {
                let mut categories = Vec::new();
                let start = j;
                while j < width && schema.features[j].one_hot.as_ref().is_some_and(|s| s.feature == src.feature) {
                    categories.push(schema.features[j].one_hot.as_ref().map(|s| s.category.clone()).unwrap_or_default());
                    j += 1;
                }
                dims.push(Dim::Categorical {
                    name: src.feature.clone(),
                    start,
                    categories,
                    mutable: f.mutable,
                });
                continue;
            }
            let (low, high) = match f.range {
                Some(r) => r,
                None if !reference.is_empty() => reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                }),
                None => {
                    return Err(Error::Precondition(format!(
                        "feature {:?} has no range and there is no reference data to infer one",
                        f.name
                    )))
                }
            };
            dims.push(Dim::Numeric {
                name: f.name.clone(),
                column: j,
                low,
                high,
                mutable: f.mutable,
            });
            j += 1;
        }
        Ok(CfSpace { width, dims })
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.dims.is_empty() {
            return 0.0;
        }
        self.dims.iter().map(|d| d.gap(a, b)).sum::<f64>() / self.dims.len() as f64
    }

    fn dim_index(&self, name: &str) -> Result<usize> {
        self.dims
            .iter()
            .position(|d| d.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown feature {name:?}")))
    }

    fn scaled(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for d in &self.dims {
            d.scaled(row, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfQuery {
    /// Encoded row, as the model sees it.
    pub instance: Vec<f64>,
    pub desired_class: u8,
    pub total_cfs: usize,
    /// Dimension names allowed to change; `None` means every mutable one.
    #[serde(default)]
    pub features_to_vary: Option<Vec<String>>,
    /// Per-dimension numeric bounds, inside the dimension's own range.
    #[serde(default)]
    pub permitted_ranges: BTreeMap<String, (f64, f64)>,
    #[serde(default = "default_proximity")]
    pub proximity_weight: f64,
    #[serde(default = "default_diversity")]
    pub diversity_weight: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_proximity() -> f64 {
    1.0
}

fn default_diversity() -> f64 {
    3.0
}

impl CfQuery {
    pub fn new(instance: Vec<f64>, desired_class: u8, total_cfs: usize) -> CfQuery {
        CfQuery {
            instance,
            desired_class,
            total_cfs,
            features_to_vary: None,
            permitted_ranges: BTreeMap::new(),
            proximity_weight: default_proximity(),
            diversity_weight: default_diversity(),
            seed: 0,
        }
    }
}

/// How one dimension may move for a given query.
#[derive(Debug, Clone, Copy)]
enum Freedom {
    Fixed,
    Range(f64, f64),
    Category,
}

/// A validated query bound to a model and space.
struct Problem<'a> {
    model: &'a TrainedModel,
    space: &'a CfSpace,
    query: &'a CfQuery,
    freedom: Vec<Freedom>,
    varying: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a TrainedModel, space: &'a CfSpace, query: &'a CfQuery) -> Result<Problem<'a>> {
        if model.n_features() != space.width || query.instance.len() != space.width {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                got: query.instance.len(),
            });
        }
        if query.desired_class > 1 {
            return Err(Error::Config(format!("desired class must be 0 or 1, got {}", query.desired_class)));
        }
        if query.total_cfs == 0 {
            return Err(Error::Config("total_cfs must be positive".into()));
        }
        if query.proximity_weight < 0.0 || query.diversity_weight < 0.0 {
            return Err(Error::Config("proximity and diversity weights must be non-negative".into()));
        }
        if predict(model, &query.instance)? == query.desired_class {
            return Err(Error::Precondition(format!(
                "the model already predicts class {} for this instance",
                query.desired_class
            )));
        }
        let allowed: BTreeSet<usize> = match &query.features_to_vary {
            Some(names) => {
                let mut set = BTreeSet::new();
                for n in names {
                    let i = space.dim_index(n)?;
                    if !space.dims[i].mutable() {
                        return Err(Error::Config(format!("feature {n:?} is immutable and cannot vary")));
                    }
                    set.insert(i);
                }
                set
            }
            None => (0..space.dims.len()).filter(|&i| space.dims[i].mutable()).collect(),
        };
        for (name, &(lo, hi)) in &query.permitted_ranges {
            let i = space.dim_index(name)?;
            match &space.dims[i] {
                Dim::Numeric { low, high, .. } => {
                    if !(lo <= hi) || lo < *low || hi > *high {
                        return Err(Error::Config(format!(
                            "permitted range [{lo}, {hi}] for {name:?} is not inside [{low}, {high}]"
                        )));
                    }
                }
                Dim::Categorical { .. } => {
                    return Err(Error::Config(format!("{name:?} is categorical and takes no numeric range")))
                }
            }
        }
        let freedom: Vec<Freedom> = space
            .dims
            .iter()
            .enumerate()
            .map(|(i, d)| match d {
                _ if !allowed.contains(&i) => Freedom::Fixed,
                Dim::Numeric { low, high, name, .. } => {
                    let (lo, hi) = query.permitted_ranges.get(name).copied().unwrap_or((*low, *high));
                    Freedom::Range(lo, hi)
                }
                Dim::Categorical { .. } => Freedom::Category,
            })
            .collect();
        Ok(Problem {
            model,
            space,
            query,
            varying: allowed.into_iter().collect(),
            freedom,
        })
    }

    fn predict(&self, row: &[f64]) -> Result<u8> {
        predict(self.model, row)
    }

    /// Changed dimensions must be free and inside their permitted range.
    fn admissible(&self, row: &[f64]) -> bool {
        let x = &self.query.instance;
        self.space.dims.iter().zip(&self.freedom).all(|(d, fr)| {
            if !d.changed(row, x) {
                return true;
            }
            match (fr, d) {
                (Freedom::Fixed, _) => false,
                (Freedom::Range(lo, hi), Dim::Numeric { column, .. }) => row[*column] >= *lo && row[*column] <= *hi,
                (Freedom::Category, Dim::Categorical { .. }) => true,
                _ => false,
            }
        })
    }

    fn resample_dim(&self, row: &mut [f64], i: usize, r: &mut rng::Rng) {
        match (self.freedom[i], &self.space.dims[i]) {
            (Freedom::Range(lo, hi), Dim::Numeric { column, .. }) => {
                row[*column] = if hi > lo { r.random_range(lo..=hi) } else { lo };
            }
            (Freedom::Category, Dim::Categorical { start, categories, .. }) => {
                let c = r.random_range(0..categories.len());
                for k in 0..categories.len() {
                    row[start + k] = f64::from(u8::from(k == c));
                }
            }
            _ => {}
        }
    }

    fn copy_dim(&self, row: &mut [f64], from: &[f64], i: usize) {
        match &self.space.dims[i] {
            Dim::Numeric { column, .. } => row[*column] = from[*column],
            Dim::Categorical { start, categories, .. } => {
                row[*start..*start + categories.len()].copy_from_slice(&from[*start..*start + categories.len()])
            }
        }
    }

    fn candidate(&self, row: Vec<f64>, source_index: Option<usize>) -> Result<Counterfactual> {
        Ok(Counterfactual {
            output: self.model.proba_row(&row)?,
            distance: self.space.distance(&row, &self.query.instance),
            row,
            source_index,
        })
    }
}

fn predict(model: &TrainedModel, row: &[f64]) -> Result<u8> {
    Ok(u8::from(model.proba_row(row)? >= THRESHOLD))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfMethod {
    Random,
    Kdtree,
    Genetic,
}

impl CfMethod {
    pub fn parse(s: &str) -> Result<CfMethod> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(CfMethod::Random),
            "kdtree" => Ok(CfMethod::Kdtree),
            "genetic" => Ok(CfMethod::Genetic),
            other => Err(Error::Config(format!("unknown counterfactual method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub row: Vec<f64>,
    /// Positive-class probability.
    pub output: f64,
    pub distance: f64,
    /// Row index in the reference data, for the KD-tree method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfSet {
    pub method: CfMethod,
    pub counterfactuals: Vec<Counterfactual>,
}

/// Random perturbation: each attempt redraws a random nonempty subset of the
/// free dimensions and keeps the row if it reaches the desired class.
pub fn generate_random(model: &TrainedModel, space: &CfSpace, query: &CfQuery, max_attempts: usize) -> Result<CfSet> {
    let p = Problem::new(model, space, query)?;
    let mut found: Vec<Counterfactual> = Vec::new();
    let mut r = rng::seeded(query.seed);
    let m = p.varying.len();
    if m > 0 {
        for _ in 0..max_attempts {
            if found.len() >= query.total_cfs {
                break;
            }
            let k = r.random_range(1..=m);
            let mut row = query.instance.clone();
            for pick in sample(&mut r, m, k) {
                p.resample_dim(&mut row, p.varying[pick], &mut r);
            }
            if p.predict(&row)? == query.desired_class && !found.iter().any(|c| c.row == row) {
                found.push(p.candidate(row, None)?);
            }
        }
    }
    Ok(CfSet {
        method: CfMethod::Random,
        counterfactuals: found,
    })
}

/// KD-tree over points in a space where L1 distance divided by the
/// dimension count equals [`CfSpace::distance`].
pub struct KdTree {
    points: Vec<Vec<f64>>,
    nodes: Vec<KdNode>,
}

enum KdNode {
    Leaf(Vec<usize>),
    Split { axis: usize, value: f64, left: usize, right: usize },
}

const KD_LEAF: usize = 8;

impl KdTree {
    pub fn build(points: Vec<Vec<f64>>) -> KdTree {
        let mut tree = KdTree {
            points,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..tree.points.len()).collect();
        tree.grow(idx);
        tree
    }

    fn grow(&mut self, mut idx: Vec<usize>) -> usize {
        let at = self.nodes.len();
        self.nodes.push(KdNode::Leaf(Vec::new()));
        let dims = self.points.first().map_or(0, |p| p.len());
        let spread = |a: usize, idx: &[usize], pts: &[Vec<f64>]| {
            let (lo, hi) = idx
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(pts[i][a]), hi.max(pts[i][a])));
            hi - lo
        };
        let axis = (0..dims).max_by(|&a, &b| spread(a, &idx, &self.points).total_cmp(&spread(b, &idx, &self.points)));
        match axis {
            Some(axis) if idx.len() > KD_LEAF && spread(axis, &idx, &self.points) > 0.0 => {
                idx.sort_by(|&a, &b| self.points[a][axis].total_cmp(&self.points[b][axis]).then(a.cmp(&b)));
                let mid = idx.len() / 2;
                let value = self.points[idx[mid - 1]][axis];
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.points[i][axis] <= value);
                if l.is_empty() || r.is_empty() {
                    self.nodes[at] = KdNode::Leaf(idx);
                    return at;
                }
                let left = self.grow(l);
                let right = self.grow(r);
                self.nodes[at] = KdNode::Split { axis, value, left, right };
            }
            _ => self.nodes[at] = KdNode::Leaf(idx),
        }
        at
    }

    /// The `k` nearest points by L1 distance, ties broken by index.
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::new();
        if !self.points.is_empty() && k > 0 {
            self.search(0, q, k, &mut best);
        }
        best
    }

    fn search(&self, at: usize, q: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        match &self.nodes[at] {
            KdNode::Leaf(idx) => {
                for &i in idx {
                    let d: f64 = self.points[i].iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
                    let pos = best.partition_point(|&(bd, bi)| bd < d || (bd == d && bi < i));
                    if pos < k {
                        best.insert(pos, (d, i));
                        best.truncate(k);
                    }
                }
            }
            &KdNode::Split { axis, value, left, right } => {
                let (near, far) = if q[axis] <= value { (left, right) } else { (right, left) };
                self.search(near, q, k, best);
                let gap = (q[axis] - value).abs();
                if best.len() < k || gap <= best[best.len() - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}

/// Nearest reference rows that the model assigns to the desired class and
/// that only differ from the instance where the query allows.
pub fn generate_kdtree(model: &TrainedModel, space: &CfSpace, query: &CfQuery, reference: &[Vec<f64>]) -> Result<CfSet> {
    let p = Problem::new(model, space, query)?;
    let mut keep = Vec::new();
    for (i, row) in reference.iter().enumerate() {
        if row.len() != space.width {
            return Err(Error::DimensionMismatch {
                expected: space.width,
                got: row.len(),
            });
        }
        if p.admissible(row) && p.predict(row)? == query.desired_class {
            keep.push(i);
        }
    }
    let tree = KdTree::build(keep.iter().map(|&i| space.scaled(&reference[i])).collect());
    let counterfactuals = tree
        .nearest(&space.scaled(&query.instance), query.total_cfs)
        .into_iter()
        .map(|(_, k)| p.candidate(reference[keep[k]].clone(), Some(keep[k])))
        .collect::<Result<_>>()?;
    Ok(CfSet {
        method: CfMethod::Kdtree,
        counterfactuals,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GeneticParams {
    pub generations: usize,
    pub population: usize,
}

impl Default for GeneticParams {
    fn default() -> Self {
        GeneticParams {
            generations: DEFAULT_GENERATIONS,
            population: DEFAULT_POPULATION,
        }
    }
}

#[derive(Clone)]
struct Scored {
    row: Vec<f64>,
    valid: bool,
    /// Shortfall of the desired-class output below the threshold.
    hinge: f64,
    distance: f64,
    fitness: f64,
}

impl Scored {
    /// Valid rows beat invalid ones; invalid rows compare by hinge, valid by fitness.
    fn beats(&self, other: &Scored) -> bool {
        match (self.valid, other.valid) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.hinge < other.hinge,
            (true, true) => self.fitness > other.fitness,
        }
    }
}

/// Genetic search over the free dimensions with tournament selection,
/// uniform crossover and per-gene mutation. Fitness of a valid row is
/// `-proximity_weight * distance + diversity_weight * (mean distance to the
/// rest of the population)`. The result is picked greedily from every valid
/// row seen, trading the same two terms, and each pick is then polished
/// toward the instance.
pub fn generate_genetic(model: &TrainedModel, space: &CfSpace, query: &CfQuery, params: GeneticParams) -> Result<CfSet> {
    let p = Problem::new(model, space, query)?;
    let empty = CfSet {
        method: CfMethod::Genetic,
        counterfactuals: Vec::new(),
    };
    if p.varying.is_empty() || params.population == 0 {
        return Ok(empty);
    }
    let mut r = rng::seeded(query.seed);
    let x = &query.instance;
    let mut population: Vec<Vec<f64>> = (0..params.population)
        .map(|_| {
            let mut row = x.clone();
            for &i in &p.varying {
                if r.random::<f64>() < 0.5 {
                    p.resample_dim(&mut row, i, &mut r);
                }
            }
            row
        })
        .collect();
    let mut archive: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    for generation in 0..=params.generations {
        let scored = score_population(&p, &population)?;
        for s in &scored {
            if s.valid && seen.insert(s.row.iter().map(|v| v.to_bits()).collect()) {
                archive.push((s.row.clone(), s.distance));
            }
        }
        if generation == params.generations {
            break;
        }
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            if scored[a].beats(&scored[b]) {
                std::cmp::Ordering::Less
            } else if scored[b].beats(&scored[a]) {
                std::cmp::Ordering::Greater
            } else {
                a.cmp(&b)
            }
        });
        let mut next: Vec<Vec<f64>> = order.iter().take(2.min(scored.len())).map(|&i| scored[i].row.clone()).collect();
        while next.len() < params.population {
            let a = tournament(&scored, &mut r);
            let b = tournament(&scored, &mut r);
            let mut child = scored[a].row.clone();
            for &i in &p.varying {
                if r.random::<f64>() < 0.5 {
                    p.copy_dim(&mut child, &scored[b].row, i);
                }
                if r.random::<f64>() < MUTATION_RATE {
                    mutate(&p, &mut child, i, &mut r);
                }
            }
            next.push(child);
        }
        population = next;
    }
    let counterfactuals = select_diverse(&p, &archive)?
        .into_iter()
        .map(|row| p.candidate(row, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(CfSet {
        method: CfMethod::Genetic,
        counterfactuals,
    })
}

const POLISH_STEPS: usize = 40;

/// Moves a valid row toward the instance: changed categories are reverted
/// where that keeps it valid, then each changed numeric gene is bisected
/// between the instance value and its own.
fn polish(p: &Problem, mut row: Vec<f64>) -> Result<Vec<f64>> {
    let x = &p.query.instance;
    let ok = |row: &[f64]| -> Result<bool> { Ok(p.admissible(row) && p.predict(row)? == p.query.desired_class) };
    for &i in &p.varying {
        let dim = &p.space.dims[i];
        if !dim.changed(&row, x) {
            continue;
        }
        match dim {
            Dim::Categorical { .. } => {
                let mut trial = row.clone();
                p.copy_dim(&mut trial, x, i);
                if ok(&trial)? {
                    row = trial;
                }
            }
            Dim::Numeric { column, .. } => {
                let (mut bad, mut good) = (x[*column], row[*column]);
                for _ in 0..POLISH_STEPS {
                    let mid = 0.5 * (bad + good);
                    row[*column] = mid;
                    if ok(&row)? {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                row[*column] = good;
            }
        }
    }
    Ok(row)
}

fn score_population(p: &Problem, population: &[Vec<f64>]) -> Result<Vec<Scored>> {
    let outputs: Vec<f64> = population.par_iter().map(|row| p.model.proba_row(row)).collect::<Result<_>>()?;
    let q = p.query;
    let n = population.len();
    Ok(population
        .iter()
        .zip(&outputs)
        .enumerate()
        .map(|(i, (row, &out))| {
            let toward = if q.desired_class == 1 { out } else { 1.0 - out };
            let hinge = (THRESHOLD - toward).max(0.0);
            let valid = predict_from(out) == q.desired_class && p.admissible(row);
            let distance = p.space.distance(row, &q.instance);
            let spread = if n > 1 {
                population
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, o)| p.space.distance(row, o))
                    .sum::<f64>()
                    / (n - 1) as f64
            } else {
                0.0
            };
            Scored {
                row: row.clone(),
                valid,
                hinge: if valid { 0.0 } else { hinge.max(f64::EPSILON) },
                distance,
                fitness: -q.proximity_weight * distance + q.diversity_weight * spread,
            }
        })
        .collect())
}

fn predict_from(output: f64) -> u8 {
    u8::from(output >= THRESHOLD)
}

fn tournament(scored: &[Scored], r: &mut rng::Rng) -> usize {
    let mut best = r.random_range(0..scored.len());
    for _ in 1..TOURNAMENT {
        let c = r.random_range(0..scored.len());
        if scored[c].beats(&scored[best]) {
            best = c;
        }
    }
    best
}

/// Resets the gene to the instance, redraws it, or nudges a numeric gene.
fn mutate(p: &Problem, row: &mut [f64], i: usize, r: &mut rng::Rng) {
    match r.random_range(0..3) {
        0 => p.copy_dim(row, &p.query.instance, i),
        1 => p.resample_dim(row, i, r),
        _ => match (p.freedom[i], &p.space.dims[i]) {
            (Freedom::Range(lo, hi), Dim::Numeric { column, .. }) => {
                // step scale log-uniform between 0.001 and 0.1 of the range
                let scale = 0.1 * 10f64.powf(-2.0 * r.random::<f64>());
                let step: f64 = r.sample(StandardNormal);
                row[*column] = (row[*column] + scale * (hi - lo) * step).clamp(lo, hi);
            }
            _ => p.resample_dim(row, i, r),
        },
    }
}

/// Rows closer than this to an already picked row count as duplicates.
pub const DUPLICATE_DISTANCE: f64 = 1e-6;

/// Candidates are the archived rows plus a polished copy of each. Picks are
/// greedy by `-proximity * distance + diversity * mean distance to the rows
/// already picked`, skipping near-duplicates of earlier picks.
fn select_diverse(p: &Problem, archive: &[(Vec<f64>, f64)]) -> Result<Vec<Vec<f64>>> {
    let q = p.query;
    let polished: Vec<(Vec<f64>, f64)> = archive
        .par_iter()
        .map(|(row, _)| {
            let row = polish(p, row.clone())?;
            let dist = p.space.distance(&row, &q.instance);
            Ok((row, dist))
        })
        .collect::<Result<_>>()?;
    let pool: Vec<&(Vec<f64>, f64)> = polished.iter().chain(archive).collect();
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < q.total_cfs {
        let mut best: Option<(f64, usize)> = None;
        for (i, (row, dist)) in pool.iter().map(|c| (&c.0, c.1)).enumerate() {
            let gaps: Vec<f64> = picked.iter().map(|&j| p.space.distance(row, &pool[j].0)).collect();
            if gaps.iter().any(|&g| g <= DUPLICATE_DISTANCE) {
                continue;
            }
            let spread = if gaps.is_empty() { 0.0 } else { gaps.iter().sum::<f64>() / gaps.len() as f64 };
            let gain = -q.proximity_weight * dist + q.diversity_weight * spread;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, i));
            }
        }
        let Some((_, i)) = best else { break };
        picked.push(i);
    }
    Ok(picked.into_iter().map(|i| pool[i].0.clone()).collect())
}

/// Fraction of counterfactuals in which each dimension differs from the instance.
pub fn local_importance(space: &CfSpace, instance: &[f64], set: &CfSet) -> Result<Vec<(String, f64)>> {
    if set.counterfactuals.is_empty() {
        return Err(Error::Precondition("local importance needs at least one counterfactual".into()));
    }
    let n = set.counterfactuals.len() as f64;
    Ok(space
        .dims
        .iter()
        .map(|d| {
            let changed = set.counterfactuals.iter().filter(|c| d.changed(&c.row, instance)).count();
            (d.name().to_string(), changed as f64 / n)
        })
        .collect())
}

/// Tab-separated report: the query row, then one row per counterfactual
/// with "-" wherever the value is unchanged.
pub fn cf_report(space: &CfSpace, instance: &[f64], original: u8, desired: u8, set: &CfSet) -> String {
    let header: Vec<&str> = space.dims.iter().map(|d| d.name()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "query instance (outcome {original})");
    let _ = writeln!(out, "{}", header.join("\t"));
    let cells: Vec<String> = space.dims.iter().map(|d| d.render(instance)).collect();
    let _ = writeln!(out, "{}", cells.join("\t"));
    let _ = writeln!(
        out,
        "\n{} counterfactuals by {} (outcome {desired})",
        set.counterfactuals.len(),
        serde_json::to_value(set.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    );
    let _ = writeln!(out, "{}", header.join("\t"));
    for c in &set.counterfactuals {
        let cells: Vec<String> = space
            .dims
            .iter()
            .map(|d| if d.changed(&c.row, instance) { d.render(&c.row) } else { "-".into() })
            .collect();
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}
