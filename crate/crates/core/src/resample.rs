//! Class-imbalance correction for training sets: SMOTE, edited nearest
//! neighbours, Tomek-link removal, the SMOTE+cleanup composites and ADASYN.
//! GAN oversampling lives in [`crate::augment`] and is reachable through
//! [`balance`].
//!
//! All routines work on numeric, already normalized data. Synthetic rows are
//! appended after the original rows; cleanup stages only ever remove rows.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment;
use crate::data::{round_half_up, Dataset};
use crate::error::{Error, Result};
use crate::neighbors::k_nearest_table;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMethod {
    None,
    Smote,
    SmoteEnn,
    SmoteTomek,
    Adasyn,
    Vgan,
    Wgan,
}

impl BalanceMethod {
    pub const ALL: [BalanceMethod; 7] = [
        BalanceMethod::None,
        BalanceMethod::Smote,
        BalanceMethod::SmoteTomek,
        BalanceMethod::SmoteEnn,
        BalanceMethod::Adasyn,
        BalanceMethod::Vgan,
        BalanceMethod::Wgan,
    ];

    /// Column label used in metric tables.
    pub fn label(self) -> &'static str {
        match self {
            BalanceMethod::None => "Imbalanced",
            BalanceMethod::Smote => "SMOTE",
            BalanceMethod::SmoteEnn => "SMOTE-ENN",
            BalanceMethod::SmoteTomek => "SMOTE-Tomek",
            BalanceMethod::Adasyn => "ADASYN",
            BalanceMethod::Vgan => "V-GAN",
            BalanceMethod::Wgan => "W-GAN",
        }
    }

    fn is_smote_family(self) -> bool {
        matches!(
            self,
            BalanceMethod::Smote | BalanceMethod::SmoteEnn | BalanceMethod::SmoteTomek | BalanceMethod::Adasyn
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalancerConfig {
    pub method: BalanceMethod,
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after balancing.
    pub target_ratio: f64,
    pub enn_k: usize,
    pub seed: u64,
    /// Overrides the GAN epoch count (the architecture default is 10,000).
    pub gan_epochs: Option<usize>,
}

impl Default for BalancerConfig {
    fn default() -> Self {
        BalancerConfig {
            method: BalanceMethod::None,
            k_neighbors: 5,
            target_ratio: 1.0,
            enn_k: 3,
            seed: 0,
            gan_epochs: None,
        }
    }
}

impl BalancerConfig {
    pub fn new(method: BalanceMethod) -> Self {
        BalancerConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config("target_ratio must lie in (0, 1]".into()));
        }
        if self.k_neighbors == 0 || self.enn_k == 0 {
            return Err(Error::Config("neighbour counts must be positive".into()));
        }
        Ok(())
    }
}

/// Which label is the minority, and the row indices of both classes.
struct Classes {
    minority: u8,
    min_rows: Vec<usize>,
    maj_rows: Vec<usize>,
}

/// Label 1 (fraud) is the minority unless it strictly outnumbers label 0.
fn classes(labels: &[u8]) -> Result<Classes> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Precondition("both classes must be present".into()));
    }
    Ok(if pos.len() <= neg.len() {
        Classes {
            minority: 1,
            min_rows: pos,
            maj_rows: neg,
        }
    } else {
        Classes {
            minority: 0,
            min_rows: neg,
            maj_rows: pos,
        }
    })
}

fn majority_label(labels: &[u8]) -> u8 {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    u8::from(pos > labels.len() - pos)
}

fn oversampling_inputs(data: &Dataset, cfg: &BalancerConfig) -> Result<(Vec<Vec<f64>>, Vec<u8>, Classes)> {
    cfg.validate()?;
    let x = data.numeric_matrix()?;
    let labels = data.labels()?.to_vec();
    let cls = classes(&labels)?;
    if cls.min_rows.len() <= cfg.k_neighbors {
        return Err(Error::Precondition(format!(
            "minority class has {} rows; needs more than k_neighbors = {}",
            cls.min_rows.len(),
            cfg.k_neighbors
        )));
    }
    if x.iter().flatten().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
        return Err(Error::Precondition("oversampling expects features normalized to [0, 1]".into()));
    }
    Ok((x, labels, cls))
}

/// Number of synthetic rows needed to reach `target_ratio`.
fn synthetic_needed(cls: &Classes, target_ratio: f64) -> usize {
    round_half_up(cls.maj_rows.len() as f64 * target_ratio).saturating_sub(cls.min_rows.len())
}

/// How one synthetic row was produced: `base + gap * (neighbor - base)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

/// Snaps every one-hot group of an encoded schema back to a valid indicator vector.
fn reproject_one_hot(data: &Dataset, row: &mut [f64]) {
    let feats = &data.schema.features;
    let mut j = 0;
    while j < feats.len() {
        let Some(src) = &feats[j].one_hot else {
            j += 1;
            continue;
        };
        let mut end = j + 1;
        while end < feats.len() && feats[end].one_hot.as_ref().is_some_and(|s| s.feature == src.feature) {
            end += 1;
        }
        let hot = crate::data::argmax(&row[j..end]);
        for (o, v) in row[j..end].iter_mut().enumerate() {
            *v = if o == hot { 1.0 } else { 0.0 };
        }
        j = end;
    }
}

fn interpolate(x: &[Vec<f64>], base: usize, neighbor: usize, gap: f64) -> Vec<f64> {
    x[base]
        .iter()
        .zip(&x[neighbor])
        .map(|(a, b)| a + gap * (b - a))
        .collect()
}

fn append(data: &Dataset, synthetic: Vec<Vec<f64>>, label: u8) -> Result<Dataset> {
    let mut out = data.clone();
    let labels = out.labels.get_or_insert_with(Vec::new);
    for mut row in synthetic {
        reproject_one_hot(data, &mut row);
        out.rows.push(row.into_iter().map(crate::data::Cell::Num).collect());
        labels.push(label);
    }
    Ok(out)
}

/// SMOTE, also returning how every appended row was built.
pub fn smote_with_provenance(data: &Dataset, cfg: &BalancerConfig) -> Result<(Dataset, Vec<Provenance>)> {
    let (x, _, cls) = oversampling_inputs(data, cfg)?;
    let needed = synthetic_needed(&cls, cfg.target_ratio);
    let neighbors = k_nearest_table(&x, &cls.min_rows, &cls.min_rows, cfg.k_neighbors);
    let mut rng = rng::seeded(cfg.seed);
    let mut made = Vec::with_capacity(needed);
    let mut provenance = Vec::with_capacity(needed);
    for _ in 0..needed {
        let pick = rng.random_range(0..cls.min_rows.len());
        let nn = &neighbors[pick];
        let neighbor = nn[rng.random_range(0..nn.len())];
        let gap: f64 = rng.random();
        let base = cls.min_rows[pick];
        made.push(interpolate(&x, base, neighbor, gap));
        provenance.push(Provenance { base, neighbor, gap });
    }
    Ok((append(data, made, cls.minority)?, provenance))
}

pub fn smote(data: &Dataset, cfg: &BalancerConfig) -> Result<Dataset> {
    smote_with_provenance(data, cfg).map(|(d, _)| d)
}

/// Indices of majority-class rows whose `enn_k` nearest neighbours (over all
/// other rows) vote for the other class. A tied vote keeps the row.
pub fn enn_removals(x: &[Vec<f64>], labels: &[u8], enn_k: usize) -> Result<Vec<usize>> {
    if x.len() <= enn_k {
        return Err(Error::Precondition(format!("ENN needs more than {enn_k} rows")));
    }
    let majority = majority_label(labels);
    let all: Vec<usize> = (0..x.len()).collect();
    let candidates: Vec<usize> = all.iter().copied().filter(|&i| labels[i] == majority).collect();
    let table = k_nearest_table(x, &candidates, &all, enn_k);
    Ok(candidates
        .into_iter()
        .zip(table)
        .filter(|(_, nn)| {
            let same = nn.iter().filter(|&&j| labels[j] == majority).count();
            2 * same < nn.len()
        })
        .map(|(i, _)| i)
        .collect())
}

fn without(data: &Dataset, removed: &[usize]) -> Dataset {
    let mut drop = vec![false; data.n_rows()];
    for &i in removed {
        drop[i] = true;
    }
    let keep: Vec<usize> = (0..data.n_rows()).filter(|&i| !drop[i]).collect();
    data.select(&keep)
}

pub fn enn_filter(data: &Dataset, enn_k: usize) -> Result<Dataset> {
    let x = data.numeric_matrix()?;
    let removed = enn_removals(&x, data.labels()?, enn_k)?;
    Ok(without(data, &removed))
}

/// All Tomek links as `(a, b)` with `a < b`: opposite-label mutual single
/// nearest neighbours.
pub fn tomek_links(x: &[Vec<f64>], labels: &[u8]) -> Vec<(usize, usize)> {
    let all: Vec<usize> = (0..x.len()).collect();
    let nn: Vec<Option<usize>> = k_nearest_table(x, &all, &all, 1)
        .into_iter()
        .map(|v| v.first().copied())
        .collect();
    (0..x.len())
        .filter_map(|a| {
            let b = nn[a]?;
            (a < b && nn[b] == Some(a) && labels[a] != labels[b]).then_some((a, b))
        })
        .collect()
}

pub fn tomek_remove(data: &Dataset) -> Result<Dataset> {
    let x = data.numeric_matrix()?;
    let labels = data.labels()?;
    classes(labels)?;
    let majority = majority_label(labels);
    let removed: Vec<usize> = tomek_links(&x, labels)
        .into_iter()
        .map(|(a, b)| if labels[a] == majority { a } else { b })
        .collect();
    Ok(without(data, &removed))
}

pub fn smote_enn(data: &Dataset, cfg: &BalancerConfig) -> Result<Dataset> {
    enn_filter(&smote(data, cfg)?, cfg.enn_k)
}

pub fn smote_tomek(data: &Dataset, cfg: &BalancerConfig) -> Result<Dataset> {
    tomek_remove(&smote(data, cfg)?)
}

/// Splits `total` across rows in proportion to `weights` (largest remainder,
/// ties to the lower index). All-zero weights fall back to a uniform split.
pub fn adasyn_allocation(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut alloc: Vec<usize> = shares.iter().map(|s| (s + 1e-9).floor() as usize).collect();
    let mut left = total.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - alloc[a] as f64;
        let rb = shares[b] - alloc[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        if shares[i] - alloc[i] as f64 > 1e-9 {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Per-minority-row hardness: share of majority rows among its k nearest
/// neighbours over the whole dataset.
pub fn adasyn_hardness(x: &[Vec<f64>], labels: &[u8], minority_rows: &[usize], k: usize) -> Vec<f64> {
    let all: Vec<usize> = (0..x.len()).collect();
    let minority = labels[minority_rows[0]];
    k_nearest_table(x, minority_rows, &all, k)
        .iter()
        .map(|nn| nn.iter().filter(|&&j| labels[j] != minority).count() as f64 / k as f64)
        .collect()
}

pub fn adasyn(data: &Dataset, cfg: &BalancerConfig) -> Result<Dataset> {
    let (x, labels, cls) = oversampling_inputs(data, cfg)?;
    let total = round_half_up((cls.maj_rows.len() - cls.min_rows.len()) as f64 * cfg.target_ratio);
    let hardness = adasyn_hardness(&x, &labels, &cls.min_rows, cfg.k_neighbors);
    let alloc = adasyn_allocation(&hardness, total);
    let neighbors = k_nearest_table(&x, &cls.min_rows, &cls.min_rows, cfg.k_neighbors);
    let mut rng = rng::seeded(cfg.seed);
    let mut made = Vec::with_capacity(total);
    for (pick, &count) in alloc.iter().enumerate() {
        let nn = &neighbors[pick];
        for _ in 0..count {
            let neighbor = nn[rng.random_range(0..nn.len())];
            let gap: f64 = rng.random();
            made.push(interpolate(&x, cls.min_rows[pick], neighbor, gap));
        }
    }
    append(data, made, cls.minority)
}

/// Minority rows generated by a GAN trained on the minority class.
pub fn gan_oversample(data: &Dataset, cfg: &BalancerConfig) -> Result<Dataset> {
    cfg.validate()?;
    let x = data.numeric_matrix()?;
    let cls = classes(data.labels()?)?;
    let variant = match cfg.method {
        BalanceMethod::Vgan => augment::GanVariant::Vgan,
        BalanceMethod::Wgan => augment::GanVariant::Wgan,
        other => return Err(Error::Config(format!("{other:?} is not a GAN method"))),
    };
    let minority: Vec<Vec<f64>> = cls.min_rows.iter().map(|&i| x[i].clone()).collect();
    let mut spec = augment::default_gan_spec(variant, data.n_features())?;
    spec.train.seed = cfg.seed;
    if let Some(epochs) = cfg.gan_epochs {
        spec.train.epochs = epochs;
    }
    let gan = augment::train_gan(&minority, &spec)?;
    let needed = synthetic_needed(&cls, cfg.target_ratio);
    let rows = augment::sample_synthetic(&gan, needed, rng::derive(cfg.seed, 1));
    append(data, rows, cls.minority)
}

/// Sidecar manifest for a balanced dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceManifest {
    pub method: BalanceMethod,
    pub seed: u64,
    pub negatives_before: usize,
    pub positives_before: usize,
    pub negatives_after: usize,
    pub positives_after: usize,
}

/// Applies the configured method. Meant for training data only.
pub fn balance(data: &Dataset, cfg: &BalancerConfig) -> Result<(Dataset, BalanceManifest)> {
    cfg.validate()?;
    if cfg.method.is_smote_family() {
        let (neg, pos) = data.class_counts()?;
        if neg.min(pos) <= cfg.k_neighbors {
            return Err(Error::Precondition(format!(
                "k_neighbors = {} must be below the minority size {}",
                cfg.k_neighbors,
                neg.min(pos)
            )));
        }
    }
    let out = match cfg.method {
        BalanceMethod::None => data.clone(),
        BalanceMethod::Smote => smote(data, cfg)?,
        BalanceMethod::SmoteEnn => smote_enn(data, cfg)?,
        BalanceMethod::SmoteTomek => smote_tomek(data, cfg)?,
        BalanceMethod::Adasyn => adasyn(data, cfg)?,
        BalanceMethod::Vgan | BalanceMethod::Wgan => gan_oversample(data, cfg)?,
    };
    let (nb, pb) = data.class_counts()?;
    let (na, pa) = out.class_counts()?;
    let manifest = BalanceManifest {
        method: cfg.method,
        seed: cfg.seed,
        negatives_before: nb,
        positives_before: pb,
        negatives_after: na,
        positives_after: pa,
    };
    Ok((out, manifest))
}

impl BalanceManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}
