//! Browser demo over the unit square. Three JSON-in, JSON-out operations:
//!
//! - [`resample`]: balance a labelled point cloud and mark the synthetic rows
//! - [`anomaly_field`]: fit a one-class detector and score a grid
//! - [`counterfactual`]: fit a classifier and search counterfactuals for a query
//!
//! The plain functions are what the tests exercise; the `wasm_*` wrappers
//! only convert errors to JavaScript values.

use std::collections::HashSet;

use fraudkit::classify::{self, ClassifierConfig, ClassifierKind, Params};
use fraudkit::counterfactual::{self, CfMethod, CfQuery, CfSpace, GeneticParams};
use fraudkit::data::{Dataset, Feature, FeatureSchema};
use fraudkit::occ::{self, DetectorConfig, DetectorKind};
use fraudkit::resample::{self, BalanceMethod, BalancerConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest grid side accepted for score and probability fields.
pub const MAX_RESOLUTION: usize = 128;
/// GAN epochs when the request does not say; the library default is far
/// too slow for a page.
pub const DEMO_GAN_EPOCHS: usize = 300;

type Point = [f64; 2];

fn schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature::numeric("x").with_range(0.0, 1.0),
        Feature::numeric("y").with_range(0.0, 1.0),
    ])
    .expect("two distinct names")
}

fn to_rows(points: &[Point]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.to_vec()).collect()
}

fn check_points(points: &[Point]) -> Result<(), String> {
    if let Some(p) = points.iter().find(|p| p.iter().any(|v| !(0.0..=1.0).contains(v))) {
        return Err(format!("point {p:?} lies outside the unit square"));
    }
    Ok(())
}

fn labelled(points: &[Point], labels: &[u8]) -> Result<Dataset, String> {
    check_points(points)?;
    if points.len() != labels.len() {
        return Err(format!("{} points but {} labels", points.len(), labels.len()));
    }
    Dataset::from_numeric(schema(), to_rows(points), Some(labels.to_vec())).map_err(|e| e.to_string())
}

/// Cell centres of a `resolution`² grid, row by row from y = 0.
fn grid(resolution: usize) -> Result<Vec<Vec<f64>>, String> {
    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(format!("resolution must lie in 1..={MAX_RESOLUTION}"));
    }
    let step = 1.0 / resolution as f64;
    Ok((0..resolution)
        .flat_map(|i| (0..resolution).map(move |j| vec![(j as f64 + 0.5) * step, (i as f64 + 0.5) * step]))
        .collect())
}

fn parse<'a, T: Deserialize<'a>>(json: &'a str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

fn render<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleRequest {
    pub points: Vec<Point>,
    pub labels: Vec<u8>,
    pub method: BalanceMethod,
    #[serde(default)]
    pub k_neighbors: Option<usize>,
    #[serde(default)]
    pub gan_epochs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ResampleResponse {
    pub points: Vec<Point>,
    pub labels: Vec<u8>,
    /// True for rows that are not among the input points.
    pub synthetic: Vec<bool>,
    /// Input rows the method dropped.
    pub removed: usize,
}

pub fn resample(json: &str) -> Result<String, String> {
    let req: ResampleRequest = parse(json)?;
    let data = labelled(&req.points, &req.labels)?;
    let mut cfg = BalancerConfig {
        seed: req.seed,
        ..BalancerConfig::new(req.method)
    };
    if let Some(k) = req.k_neighbors {
        cfg.k_neighbors = k;
    }
    if matches!(req.method, BalanceMethod::Vgan | BalanceMethod::Wgan) {
        cfg.gan_epochs = Some(req.gan_epochs.unwrap_or(DEMO_GAN_EPOCHS));
    }
    let (out, _) = resample::balance(&data, &cfg).map_err(|e| e.to_string())?;
    let rows = out.numeric_matrix().map_err(|e| e.to_string())?;
    let original: HashSet<[u64; 2]> = req.points.iter().map(|p| [p[0].to_bits(), p[1].to_bits()]).collect();
    let synthetic: Vec<bool> = rows
        .iter()
        .map(|r| !original.contains(&[r[0].to_bits(), r[1].to_bits()]))
        .collect();
    let kept = synthetic.iter().filter(|s| !**s).count();
    render(&ResampleResponse {
        points: rows.iter().map(|r| [r[0], r[1]]).collect(),
        labels: out.labels.unwrap_or_default(),
        synthetic,
        removed: req.points.len().saturating_sub(kept),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyRequest {
    /// Normal points the detector learns from.
    pub points: Vec<Point>,
    pub detector: DetectorKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub contamination: Option<f64>,
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct AnomalyResponse {
    pub resolution: usize,
    /// Row-major scores over the grid, higher is more anomalous.
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Training points above the threshold.
    pub flagged: Vec<bool>,
}

pub fn anomaly_field(json: &str) -> Result<String, String> {
    let req: AnomalyRequest = parse(json)?;
    check_points(&req.points)?;
    let mut cfg = DetectorConfig::new(req.detector).with_seed(req.seed);
    cfg.params = req.params;
    if let Some(c) = req.contamination {
        cfg = cfg.with_contamination(c);
    }
    let names = vec!["x".to_string(), "y".to_string()];
    let rows = to_rows(&req.points);
    let det = occ::fit_detector_matrix(&cfg, &rows, names).map_err(|e| e.to_string())?;
    let scores = det.score(&grid(req.resolution)?).map_err(|e| e.to_string())?;
    let flagged = det.classify(&rows).map_err(|e| e.to_string())?.into_iter().map(|v| v == 1).collect();
    render(&AnomalyResponse {
        resolution: req.resolution,
        scores,
        threshold: det.threshold,
        flagged,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfRequest {
    pub points: Vec<Point>,
    pub labels: Vec<u8>,
    pub model: ClassifierKind,
    #[serde(default)]
    pub params: Params,
    pub query: Point,
    pub method: CfMethod,
    pub total: usize,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CfPoint {
    pub point: Point,
    pub probability: f64,
    pub distance: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CfResponse {
    pub predicted: u8,
    pub probability: f64,
    pub counterfactuals: Vec<CfPoint>,
    /// Positive-class probability over the grid, when a resolution was given.
    pub field: Option<Vec<f64>>,
}

pub fn counterfactual(json: &str) -> Result<String, String> {
    let req: CfRequest = parse(json)?;
    let data = labelled(&req.points, &req.labels)?;
    check_points(&[req.query])?;
    let cfg = ClassifierConfig {
        kind: req.model,
        params: req.params,
        seed: req.seed,
    };
    let model = classify::fit(&cfg, &data).map_err(|e| e.to_string())?;
    let instance = req.query.to_vec();
    let probability = model.proba_row(&instance).map_err(|e| e.to_string())?;
    let predicted = u8::from(probability >= classify::THRESHOLD);
    let rows = to_rows(&req.points);
    let space = CfSpace::new(&schema(), &rows).map_err(|e| e.to_string())?;
    let query = CfQuery {
        seed: req.seed,
        ..CfQuery::new(instance, 1 - predicted, req.total)
    };
    let set = match req.method {
        CfMethod::Random => counterfactual::generate_random(&model, &space, &query, counterfactual::DEFAULT_MAX_ATTEMPTS),
        CfMethod::Kdtree => counterfactual::generate_kdtree(&model, &space, &query, &rows),
        CfMethod::Genetic => counterfactual::generate_genetic(&model, &space, &query, GeneticParams::default()),
    }
    .map_err(|e| e.to_string())?;
    let field = match req.resolution {
        Some(r) => Some(model.predict_proba(&grid(r)?).map_err(|e| e.to_string())?),
        None => None,
    };
    render(&CfResponse {
        predicted,
        probability,
        counterfactuals: set
            .counterfactuals
            .iter()
            .map(|c| CfPoint {
                point: [c.row[0], c.row[1]],
                probability: c.output,
                distance: c.distance,
            })
            .collect(),
        field,
    })
}

#[wasm_bindgen(js_name = resample)]
pub fn wasm_resample(request: &str) -> Result<String, JsValue> {
    resample(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = anomalyField)]
pub fn wasm_anomaly_field(request: &str) -> Result<String, JsValue> {
    anomaly_field(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = counterfactual)]
pub fn wasm_counterfactual(request: &str) -> Result<String, JsValue> {
    counterfactual(request).map_err(|e| JsValue::from_str(&e))
}
