//! Config-driven orchestration, the synthetic dataset generator and report files.
//!
//! A binary run goes prep (cleanse, encode, split, normalize) → balance
//! (training side only) → train (grid search, refit, score on the untouched
//! test side) → report → explain → cf. An OCC run goes prep → occ, fitting
//! detectors on the negatives and reporting the share of positives each one
//! flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierConfig, ClassifierKind, Params};
use crate::counterfactual::{self, CfMethod};
use crate::data;
use crate::error::{Error, Result};
use crate::explain::ExplainMethod;
use crate::occ::{DetectorConfig, DetectorKind};
use crate::resample::{BalanceMethod, BalancerConfig};

mod stages;
mod synth;

pub use stages::*;
pub use synth::*;

pub const REPORT_FORMAT: &str = "fraudkit-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Binary,
    Occ,
}

/// Shared balancer settings; the method comes from the `balancers` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalancerSettings {
    pub k_neighbors: usize,
    pub target_ratio: f64,
    pub enn_k: usize,
    pub gan_epochs: Option<usize>,
}

impl Default for BalancerSettings {
    fn default() -> Self {
        let b = BalancerConfig::default();
        BalancerSettings {
            k_neighbors: b.k_neighbors,
            target_ratio: b.target_ratio,
            enn_k: b.enn_k,
            gan_epochs: b.gan_epochs,
        }
    }
}

impl BalancerSettings {
    pub fn config(&self, method: BalanceMethod, seed: u64) -> BalancerConfig {
        BalancerConfig {
            method,
            k_neighbors: self.k_neighbors,
            target_ratio: self.target_ratio,
            enn_k: self.enn_k,
            seed,
            gan_epochs: self.gan_epochs,
        }
    }
}

/// Either the built-in grid for the kind (`"table"`) or explicit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridChoice {
    Named(String),
    Points(Vec<Params>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierTemplate {
    pub kind: ClassifierKind,
    /// Base parameters; grid points override them key by key.
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridChoice>,
}

impl ClassifierTemplate {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierTemplate {
            kind,
            params: Params::new(),
            grid: None,
        }
    }

    /// Concrete grid points, each merged over the base parameters.
    pub fn points(&self) -> Result<Vec<Params>> {
        let raw = match &self.grid {
            None => vec![Params::new()],
            Some(GridChoice::Named(name)) if name == "table" => classify::table_grid(self.kind),
            Some(GridChoice::Named(name)) => {
                return Err(Error::Config(format!("unknown grid {name:?}; use \"table\" or a list of points")))
            }
            Some(GridChoice::Points(p)) if p.is_empty() => {
                return Err(Error::Config(format!("{} grid is empty", self.kind)))
            }
            Some(GridChoice::Points(p)) => p.clone(),
        };
        Ok(raw
            .into_iter()
            .map(|point| {
                let mut merged = self.params.clone();
                merged.extend(point);
                merged
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSettings {
    pub enabled: bool,
    /// Defaults to the first tree model, else the first classifier.
    pub model: Option<ClassifierKind>,
    /// Defaults to `tree` for tree models and `sampling` otherwise.
    pub method: Option<ExplainMethod>,
    pub rows: usize,
    pub background: usize,
    pub permutations: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            enabled: true,
            model: None,
            method: None,
            rows: 100,
            background: 100,
            permutations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfSettings {
    pub enabled: bool,
    pub model: Option<ClassifierKind>,
    pub method: CfMethod,
    pub queries: usize,
    pub total_cfs: usize,
    pub max_attempts: usize,
    pub proximity_weight: f64,
    pub diversity_weight: f64,
}

impl Default for CfSettings {
    fn default() -> Self {
        CfSettings {
            enabled: true,
            model: None,
            method: CfMethod::Random,
            queries: 3,
            total_cfs: 4,
            max_attempts: counterfactual::DEFAULT_MAX_ATTEMPTS,
            proximity_weight: 1.0,
            diversity_weight: 3.0,
        }
    }
}

fn default_version() -> u32 {
    REPORT_VERSION
}
fn default_label() -> String {
    data::LABEL_COLUMN.to_string()
}
fn default_folds() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.8
}
fn default_null_threshold() -> f64 {
    0.5
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    pub pipeline: PipelineKind,
    /// Binary runs only; empty means no balancing.
    #[serde(default)]
    pub balancers: Vec<BalanceMethod>,
    #[serde(default)]
    pub balancer: BalancerSettings,
    /// Binary runs; empty means every kind with default parameters.
    #[serde(default)]
    pub classifiers: Vec<ClassifierTemplate>,
    /// OCC runs; empty means every detector with default parameters.
    #[serde(default)]
    pub detectors: Vec<DetectorConfig>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_null_threshold")]
    pub null_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Model pairs compared by paired t-test on fold AUCs under the first
    /// balancer; empty means every pair.
    #[serde(default)]
    pub ttest: Vec<(ClassifierKind, ClassifierKind)>,
    #[serde(default)]
    pub explain: ExplainSettings,
    #[serde(default)]
    pub counterfactual: CfSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Reads a config; relative paths resolve against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.schema, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != REPORT_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie strictly between 0 and 1".into()));
        }
        if !(0.0..=1.0).contains(&self.null_threshold) {
            return Err(Error::Config("null_threshold must lie in [0, 1]".into()));
        }
        match self.pipeline {
            PipelineKind::Binary => {
                if self.cv_folds < 2 {
                    return Err(Error::Config("cv_folds must be at least 2".into()));
                }
                if !self.detectors.is_empty() {
                    return Err(Error::Config("detectors belong to the occ pipeline".into()));
                }
                for t in &self.classifiers {
                    for p in t.points()? {
                        ClassifierConfig {
                            kind: t.kind,
                            params: p,
                            seed: 0,
                        }
                        .validate()?;
                    }
                }
                for (i, m) in self.balancers.iter().enumerate() {
                    if self.balancers[..i].contains(m) {
                        return Err(Error::Config(format!("balancer {} is listed twice", m.label())));
                    }
                    self.balancer.config(*m, 0).validate()?;
                }
                let kinds = self.classifier_templates();
                for (a, b) in &self.ttest {
                    if !kinds.iter().any(|t| t.kind == *a) || !kinds.iter().any(|t| t.kind == *b) {
                        return Err(Error::Config(format!("t-test pair {a}/{b} names a model that is not trained")));
                    }
                }
            }
            PipelineKind::Occ => {
                if !self.balancers.is_empty() {
                    return Err(Error::Config(
                        "balancing applies to the binary pipeline only; remove `balancers` from this occ config".into(),
                    ));
                }
                if !self.classifiers.is_empty() {
                    return Err(Error::Config("classifiers belong to the binary pipeline".into()));
                }
                for d in &self.detectors {
                    d.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn classifier_templates(&self) -> Vec<ClassifierTemplate> {
        if self.classifiers.is_empty() {
            ClassifierKind::ALL.iter().map(|&k| ClassifierTemplate::new(k)).collect()
        } else {
            self.classifiers.clone()
        }
    }

    pub fn balance_methods(&self) -> Vec<BalanceMethod> {
        if self.balancers.is_empty() {
            vec![BalanceMethod::None]
        } else {
            self.balancers.clone()
        }
    }

    pub fn detector_configs(&self) -> Vec<DetectorConfig> {
        if self.detectors.is_empty() {
            DetectorKind::ALL.iter().map(|&k| DetectorConfig::new(k)).collect()
        } else {
            self.detectors.clone()
        }
    }
}

/// A failure tagged with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;
