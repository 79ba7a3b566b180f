//! Confusion metrics, stratified k-fold cross-validation, grid search and the
//! paired t-test.
//!
//! "AUC" here is the balanced accuracy of hard predictions,
//! `(sensitivity + specificity) / 2`, not the area under a ROC curve.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierConfig, ClassifierKind, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::resample::{self, BalancerConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts with 1 as the positive (fraud) class.
pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::Data(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(Error::Data(format!("label pair ({y}, {p}) is not binary"))),
        }
    }
    Ok(cm)
}

pub fn sensitivity(cm: &ConfusionMatrix) -> Result<f64> {
    let den = cm.tp + cm.fn_;
    if den == 0 {
        return Err(Error::UndefinedMetric("sensitivity needs at least one positive row"));
    }
    Ok(cm.tp as f64 / den as f64)
}

pub fn specificity(cm: &ConfusionMatrix) -> Result<f64> {
    let den = cm.tn + cm.fp;
    if den == 0 {
        return Err(Error::UndefinedMetric("specificity needs at least one negative row"));
    }
    Ok(cm.tn as f64 / den as f64)
}

/// Balanced accuracy from its two halves.
pub fn balanced(sensitivity: f64, specificity: f64) -> f64 {
    (sensitivity + specificity) / 2.0
}

pub fn auc(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(balanced(sensitivity(cm)?, specificity(cm)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified folds. Each class is shuffled and dealt round-robin, with the
/// dealing position carried from one class to the next so fold sizes differ
/// by at most one. Every class needs at least `k` rows, except when `k`
/// equals the row count (leave-one-out).
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Precondition(format!("k = {k} exceeds the {n} rows")));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 | 1 => classes[y as usize].push(i),
            _ => return Err(Error::Data(format!("label {y} at row {i} is not binary"))),
        }
    }
    if k != n {
        for (c, rows) in classes.iter().enumerate() {
            if rows.len() < k {
                return Err(Error::Precondition(format!(
                    "class {c} has {} rows, fewer than k = {k}",
                    rows.len()
                )));
            }
        }
    }
    let mut r = rng::seeded(seed);
    let mut assignment = vec![0usize; n];
    let mut slot = 0usize;
    for rows in classes.iter_mut() {
        rows.shuffle(&mut r);
        for &i in rows.iter() {
            assignment[i] = slot % k;
            slot += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl FoldMetrics {
    pub fn from_confusion(fold: usize, cm: ConfusionMatrix) -> Result<FoldMetrics> {
        let sens = sensitivity(&cm)?;
        let spec = specificity(&cm)?;
        Ok(FoldMetrics {
            fold,
            confusion: cm,
            auc: balanced(sens, spec),
            sensitivity: sens,
            specificity: spec,
        })
    }
}

/// Scores a fitted model on `data`.
pub fn score_model(model: &classify::TrainedModel, data: &Dataset) -> Result<FoldMetrics> {
    let preds = model.predict_dataset(data)?;
    FoldMetrics::from_confusion(0, confusion(data.labels()?, &preds)?)
}

/// Per-fold metrics for one configuration. When a balancer is given it is
/// applied to each training fold only, with a seed derived from the fold index.
pub fn cross_validate(
    config: &ClassifierConfig,
    data: &Dataset,
    k: usize,
    seed: u64,
    balancer: Option<&BalancerConfig>,
) -> Result<Vec<FoldMetrics>> {
    config.validate()?;
    let folds = stratified_kfold(data.labels()?, k, seed)?;
    folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let mut train = data.select(&fold.train);
            if let Some(b) = balancer {
                let cfg = BalancerConfig {
                    seed: rng::derive(b.seed, f as u64),
                    ..b.clone()
                };
                train = resample::balance(&train, &cfg)?.0;
            }
            let model = classify::fit(config, &train)?;
            let valid = data.select(&fold.validation);
            let preds = model.predict_dataset(&valid)?;
            FoldMetrics::from_confusion(f, confusion(valid.labels()?, &preds)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub params: Params,
    pub folds: Vec<FoldMetrics>,
    pub mean_auc: f64,
    pub mean_sensitivity: f64,
    pub mean_specificity: f64,
    /// Set when fitting or scoring failed; the config is then skipped.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ConfigResult {
    fn from_folds(params: Params, folds: Vec<FoldMetrics>) -> ConfigResult {
        let m = folds.len() as f64;
        let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / m;
        ConfigResult {
            mean_auc: mean(|f| f.auc),
            mean_sensitivity: mean(|f| f.sensitivity),
            mean_specificity: mean(|f| f.specificity),
            params,
            folds,
            error: None,
        }
    }

    fn failed(params: Params, err: &Error) -> ConfigResult {
        ConfigResult {
            params,
            folds: Vec::new(),
            mean_auc: 0.0,
            mean_sensitivity: 0.0,
            mean_specificity: 0.0,
            error: Some(err.to_string()),
        }
    }

    pub fn aucs(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.auc).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub kind: ClassifierKind,
    pub k: usize,
    pub seed: u64,
    pub configs: Vec<ConfigResult>,
    /// Index into `configs` of the best mean AUC; the first listed wins ties.
    pub winner: usize,
}

impl CvResult {
    pub fn best(&self) -> &ConfigResult {
        &self.configs[self.winner]
    }

    pub fn best_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            kind: self.kind,
            params: self.best().params.clone(),
            seed: self.seed,
        }
    }
}

/// Evaluates every grid point by stratified k-fold CV. Configs that fail are
/// recorded with their error and skipped; it is an error only if all fail.
pub fn grid_search(
    kind: ClassifierKind,
    grid: &[Params],
    data: &Dataset,
    k: usize,
    seed: u64,
    balancer: Option<&BalancerConfig>,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Config("grid search needs at least one grid point".into()));
    }
    let configs: Vec<ConfigResult> = grid
        .par_iter()
        .map(|params| {
            let cfg = ClassifierConfig {
                kind,
                params: params.clone(),
                seed,
            };
            match cross_validate(&cfg, data, k, seed, balancer) {
                Ok(folds) => ConfigResult::from_folds(params.clone(), folds),
                Err(e) => {
                    log::warn!("{kind} {} failed: {e}", classify::describe_params(params));
                    ConfigResult::failed(params.clone(), &e)
                }
            }
        })
        .collect();
    let mut winner: Option<usize> = None;
    for (i, c) in configs.iter().enumerate() {
        if c.error.is_none() && winner.is_none_or(|w| c.mean_auc > configs[w].mean_auc) {
            winner = Some(i);
        }
    }
    let Some(winner) = winner else {
        let first = configs[0].error.clone().unwrap_or_default();
        return Err(Error::Precondition(format!(
            "every {kind} grid point failed; first error: {first}"
        )));
    };
    Ok(CvResult {
        kind,
        k,
        seed,
        configs,
        winner,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
}

/// Paired two-sided t-test on per-fold metrics.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Data(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Precondition("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate(
            "paired differences have zero variance, so t is undefined".into(),
        ));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = n - 1;
    Ok(TTest {
        t,
        p: t_two_sided_p(t, df as f64),
        df,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for num in [
            m * (b - m) * x / ((a + m2 - 1.0) * (a + m2)),
            -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0)),
        ] {
            d = 1.0 + num * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + num / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Column order of the metric tables.
pub const TABLE_COLUMNS: [&str; 7] = ["Imbalanced", "SMOTE", "SMOTE-Tomek", "SMOTE-ENN", "ADASYN", "V-GAN", "W-GAN"];

/// One metric as a model-by-balancing table. Missing cells are left empty.
pub fn write_metric_table<W: Write>(
    columns: &[String],
    rows: &[(String, Vec<Option<f64>>)],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["Model".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (model, values) in rows {
        let mut record = vec![model.clone()];
        record.extend(values.iter().map(|v| v.map(|x| format!("{x:.4}")).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<metric table>", e))?;
    Ok(())
}

/// Rows of `comparison,t_statistic,p_value`.
pub fn write_ttest_csv<W: Write>(rows: &[(String, TTest)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["comparison", "t_statistic", "p_value"])?;
    for (name, t) in rows {
        w.write_record([name.clone(), format!("{:.4}", t.t), format!("{:.3e}", t.p)])?;
    }
    w.flush().map_err(|e| Error::io("<t-test table>", e))?;
    Ok(())
}
