//! One-class detectors fitted on negatives only.
//!
//! Every detector scores rows so that higher means more anomalous. A fitted
//! detector's threshold is the (1 − contamination) quantile of its training
//! scores, and a row is called positive iff its score is strictly above it.

pub mod abod;
pub mod copod;
pub mod iforest;
pub mod mcd;
pub mod ocsvm;
pub mod vae;

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{check_params, describe_params, param_float, param_int, param_text, product, Domain, Param, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub use abod::Abod;
pub use copod::Copod;
pub use iforest::IsolationForest;
pub use mcd::Mcd;
pub use ocsvm::{Kernel, OneClassSvm};
pub use vae::Vae;

pub const DEFAULT_CONTAMINATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ocsvm,
    Iforest,
    Copod,
    Abod,
    Mcd,
    Vae,
}

impl DetectorKind {
    /// Row order of the CR table.
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Ocsvm,
        DetectorKind::Iforest,
        DetectorKind::Copod,
        DetectorKind::Abod,
        DetectorKind::Mcd,
        DetectorKind::Vae,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Ocsvm => "OCSVM",
            DetectorKind::Iforest => "IForest",
            DetectorKind::Copod => "COPOD",
            DetectorKind::Abod => "ABOD",
            DetectorKind::Mcd => "MCD",
            DetectorKind::Vae => "VAE",
        }
    }

    pub fn parse(s: &str) -> Result<DetectorKind> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown detector {s:?}")))
    }

    /// Fewest training rows each detector accepts (MCD also needs more rows than features).
    pub fn min_rows(self) -> usize {
        match self {
            DetectorKind::Ocsvm | DetectorKind::Iforest | DetectorKind::Copod => 2,
            DetectorKind::Abod => 3,
            DetectorKind::Mcd => 3,
            DetectorKind::Vae => 2,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn default_contamination() -> f64 {
    DEFAULT_CONTAMINATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_contamination")]
    pub contamination: f64,
    #[serde(default)]
    pub seed: u64,
}

fn schema(kind: DetectorKind) -> &'static [(&'static str, Domain)] {
    use Domain::*;
    match kind {
        DetectorKind::Ocsvm => &[
            ("kernel", Labels(&["linear", "rbf", "poly", "sigmoid"])),
            ("nu", UnitInterval),
            ("max_iter", Int(1, 100_000_000)),
        ],
        DetectorKind::Iforest => &[("n_estimators", Int(1, 100_000)), ("max_samples", Int(2, 10_000_000))],
        DetectorKind::Copod => &[],
        DetectorKind::Abod => &[("n_neighbours", Int(2, 1_000_000))],
        DetectorKind::Mcd => &[("support_fraction", UnitInterval), ("n_starts", Int(1, 100_000))],
        DetectorKind::Vae => &[
            ("epochs", Int(1, 1_000_000)),
            ("batch_size", Int(1, 1_000_000)),
            ("learning_rate", Positive),
        ],
    }
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorConfig {
            kind,
            params: Params::new(),
            contamination: DEFAULT_CONTAMINATION,
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_contamination(mut self, c: f64) -> Self {
        self.contamination = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contamination > 0.0 && self.contamination <= 0.5) {
            return Err(Error::Config(format!(
                "contamination must be in (0, 0.5], got {}",
                self.contamination
            )));
        }
        check_params(self.kind.label(), &self.params, schema(self.kind))
    }

    pub fn describe(&self) -> String {
        describe_params(&self.params)
    }
}

/// Grid of detector parameters searched per kind.
pub fn table_grid(kind: DetectorKind) -> Vec<Params> {
    let ints = |xs: &[i64]| xs.iter().map(|&v| Param::Int(v)).collect::<Vec<_>>();
    match kind {
        DetectorKind::Ocsvm => product(&[(
            "kernel",
            ["linear", "rbf", "poly", "sigmoid"].iter().map(|&s| Param::from(s)).collect(),
        )]),
        DetectorKind::Iforest => product(&[
            ("n_estimators", ints(&[10, 50, 100, 150, 200, 250, 300])),
            ("max_samples", ints(&[500, 1000, 1500, 2000])),
        ]),
        DetectorKind::Abod => product(&[("n_neighbours", ints(&[5, 10, 20, 30, 40, 50]))]),
        DetectorKind::Copod | DetectorKind::Mcd | DetectorKind::Vae => vec![Params::new()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorState {
    Ocsvm(OneClassSvm),
    Iforest(IsolationForest),
    Copod(Copod),
    Abod(Abod),
    Mcd(Mcd),
    Vae(Vae),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDetector {
    pub kind: DetectorKind,
    pub config: DetectorConfig,
    pub feature_names: Vec<String>,
    pub state: DetectorState,
    pub threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct DetectorFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    detector: TrainedDetector,
}

const DETECTOR_FORMAT: &str = "fraudkit-detector";
const DETECTOR_VERSION: u32 = 1;

/// Upper (1 − contamination) quantile: the ⌈n(1 − c)⌉-th smallest score.
pub fn quantile_threshold(scores: &[f64], contamination: f64) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let k = ((n as f64 * (1.0 - contamination)).ceil() as usize).clamp(1, n);
    s[k - 1]
}

pub fn fit_detector(config: &DetectorConfig, negatives: &Dataset) -> Result<TrainedDetector> {
    fit_detector_matrix(config, &negatives.numeric_matrix()?, negatives.schema.names())
}

pub fn fit_detector_matrix(config: &DetectorConfig, x: &[Vec<f64>], feature_names: Vec<String>) -> Result<TrainedDetector> {
    config.validate()?;
    let d = feature_names.len();
    if d == 0 {
        return Err(Error::Precondition("no features".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    let kind = config.kind;
    if x.len() < kind.min_rows() {
        return Err(Error::Precondition(format!(
            "{kind} needs at least {} training rows, got {}",
            kind.min_rows(),
            x.len()
        )));
    }
    let p = &config.params;
    let state = match kind {
        DetectorKind::Ocsvm => {
            let kernel = Kernel::parse(&param_text(p, "kernel", "rbf")).expect("validated");
            let nu = param_float(p, "nu", 0.5);
            let max_iter = param_int(p, "max_iter", 1_000_000);
            DetectorState::Ocsvm(OneClassSvm::fit(x, kernel, nu, 1e-6, max_iter)?)
        }
        DetectorKind::Iforest => DetectorState::Iforest(IsolationForest::fit(
            x,
            param_int(p, "n_estimators", 100),
            param_int(p, "max_samples", 500),
            config.seed,
        )),
        DetectorKind::Copod => DetectorState::Copod(Copod::fit(x)),
        DetectorKind::Abod => {
            let distinct = {
                let mut rows: Vec<&Vec<f64>> = x.iter().collect();
                rows.sort_by(|a, b| a.iter().zip(b.iter()).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
                rows.dedup();
                rows.len()
            };
            if distinct < 3 {
                return Err(Error::Precondition("abod needs at least 3 distinct rows".into()));
            }
            DetectorState::Abod(Abod::fit(x, param_int(p, "n_neighbours", 10)))
        }
        DetectorKind::Mcd => {
            let frac = p.get("support_fraction").and_then(|v| match v {
                Param::Float(f) => Some(*f),
                Param::Int(i) => Some(*i as f64),
                _ => None,
            });
            DetectorState::Mcd(Mcd::fit(x, frac, param_int(p, "n_starts", 500), config.seed)?)
        }
        DetectorKind::Vae => DetectorState::Vae(Vae::fit(
            x,
            &vae::VaeParams {
                epochs: param_int(p, "epochs", 100),
                batch_size: param_int(p, "batch_size", 32),
                learning_rate: param_float(p, "learning_rate", 1e-3),
            },
            config.seed,
        )?),
    };
    let mut det = TrainedDetector {
        kind,
        config: config.clone(),
        feature_names,
        state,
        threshold: 0.0,
    };
    let train_scores = det.score(x)?;
    if train_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Diverged(format!("{kind} produced NaN training scores")));
    }
    det.threshold = quantile_threshold(&train_scores, config.contamination);
    Ok(det)
}

impl TrainedDetector {
    pub fn score(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        Ok(match &self.state {
            DetectorState::Ocsvm(m) => rows.par_iter().map(|r| m.score(r)).collect(),
            DetectorState::Iforest(m) => rows.par_iter().map(|r| m.score(r)).collect(),
            DetectorState::Copod(m) => rows.iter().map(|r| m.score(r)).collect(),
            DetectorState::Abod(m) => rows.par_iter().map(|r| m.score(r)).collect(),
            DetectorState::Mcd(m) => rows.iter().map(|r| m.score(r)).collect(),
            DetectorState::Vae(m) => m.scores(rows)?,
        })
    }

    pub fn classify(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        Ok(self.score(rows)?.into_iter().map(|s| u8::from(s > self.threshold)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DetectorFile {
            format: DETECTOR_FORMAT.into(),
            version: DETECTOR_VERSION,
            detector: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<TrainedDetector> {
        let file: DetectorFile = serde_json::from_str(text)?;
        if file.format != DETECTOR_FORMAT || file.version != DETECTOR_VERSION {
            return Err(Error::Data(format!("unsupported detector file {} v{}", file.format, file.version)));
        }
        Ok(file.detector)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedDetector> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedDetector::from_json(&text)
    }
}

/// Fraction of positive calls on a positives-only test set.
pub fn classification_rate(predictions: &[u8]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::UndefinedMetric("classification rate of an empty set"));
    }
    Ok(predictions.iter().filter(|&&p| p == 1).count() as f64 / predictions.len() as f64)
}

/// `detector,CR` rows.
pub fn write_cr_csv<W: Write>(rows: &[(String, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["detector", "CR"])?;
    for (name, cr) in rows {
        w.write_record([name.as_str(), &format!("{cr:.4}")])?;
    }
    w.flush().map_err(|e| Error::io("<cr csv>", e))?;
    Ok(())
}
