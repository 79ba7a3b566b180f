//! Seven binary classifiers behind one fit/predict contract, plus rule
//! extraction from decision trees.
//!
//! Every model outputs a positive-class probability; `predict` is 1 iff that
//! probability is at least [`THRESHOLD`].

pub mod ensemble;
pub mod linear;
pub mod rules;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::neural::{self, Activation, LayerSpec, Loss, Network, NetworkSpec, Optimizer, TrainConfig};
use crate::rng;

pub use ensemble::{BoostLoss, Boosted, Forest};
pub use linear::{GaussianNb, LinearModel, Penalty, SvmLoss};
pub use rules::{Bound, Condition, Rule, RuleClass};
pub use tree::{Criterion, Node, Tree};

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Nb,
    Lr,
    Svm,
    Dt,
    Rf,
    Gbt,
    Mlp,
}

impl ClassifierKind {
    /// Row order used by the report tables.
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Nb,
        ClassifierKind::Lr,
        ClassifierKind::Svm,
        ClassifierKind::Dt,
        ClassifierKind::Rf,
        ClassifierKind::Gbt,
        ClassifierKind::Mlp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClassifierKind::Nb => "NB",
            ClassifierKind::Lr => "LR",
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Dt => "DT",
            ClassifierKind::Rf => "RF",
            ClassifierKind::Gbt => "GBT",
            ClassifierKind::Mlp => "MLP",
        }
    }

    pub fn parse(s: &str) -> Result<ClassifierKind> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown classifier {s:?}")))
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Param {
    fn as_f64(&self) -> Option<f64> {
        match *self {
            Param::Int(i) => Some(i as f64),
            Param::Float(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Bool(b) => write!(f, "{b}"),
            Param::Int(i) => write!(f, "{i}"),
            Param::Float(x) => write!(f, "{x}"),
            Param::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Param {
    fn from(s: &str) -> Self {
        Param::Text(s.to_string())
    }
}

impl From<i64> for Param {
    fn from(v: i64) -> Self {
        Param::Int(v)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(v)
    }
}

impl From<bool> for Param {
    fn from(v: bool) -> Self {
        Param::Bool(v)
    }
}

pub type Params = BTreeMap<String, Param>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
}

pub(crate) enum Domain {
    Labels(&'static [&'static str]),
    /// Integer in the inclusive range.
    Int(i64, i64),
    /// Non-negative finite number.
    NonNegative,
    Positive,
    /// In (0, 1].
    UnitInterval,
    Flag,
    /// "sqrt", "all" or a positive integer.
    FeatureCount,
}

fn schema(kind: ClassifierKind) -> &'static [(&'static str, Domain)] {
    use Domain::*;
    const CRITERIA: &[&str] = &["gini", "entropy"];
    match kind {
        ClassifierKind::Nb => &[],
        ClassifierKind::Lr => &[
            ("regularizer", Labels(&["l1", "l2", "elasticnet"])),
            ("optimizer", Labels(&["newton-cg", "lbfgs", "liblinear"])),
            ("alpha", NonNegative),
            ("max_iter", Int(1, 1_000_000)),
        ],
        ClassifierKind::Svm => &[
            ("regularizer", Labels(&["l1", "l2"])),
            ("loss", Labels(&["hinge", "squared-hinge"])),
            ("alpha", NonNegative),
            ("max_iter", Int(1, 1_000_000)),
        ],
        ClassifierKind::Dt => &[("criterion", Labels(CRITERIA)), ("maxdepth", Int(1, 64))],
        ClassifierKind::Rf => &[
            ("criterion", Labels(CRITERIA)),
            ("maxdepth", Int(1, 64)),
            ("estimators", Int(1, 100_000)),
            ("bootstrap", Flag),
            ("max_features", FeatureCount),
        ],
        ClassifierKind::Gbt => &[
            ("loss", Labels(&["deviance", "exponential"])),
            ("learning_rate", NonNegative),
            ("maxdepth", Int(1, 64)),
            ("estimators", Int(1, 100_000)),
        ],
        ClassifierKind::Mlp => &[
            ("activation", Labels(&["logistic", "tanh", "relu"])),
            ("solver", Labels(&["adam", "sgd"])),
            ("learning_rate", Positive),
            ("epochs", Int(1, 1_000_000)),
            ("batch_size", Int(1, 1_000_000)),
        ],
    }
}

impl ClassifierConfig {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            params: Params::new(),
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

    pub fn validate(&self) -> Result<()> {
        check_params(self.kind.label(), &self.params, schema(self.kind))
    }

    fn text(&self, key: &str, default: &'static str) -> String {
        param_text(&self.params, key, default)
    }

    fn int(&self, key: &str, default: usize) -> usize {
        param_int(&self.params, key, default)
    }

    fn float(&self, key: &str, default: f64) -> f64 {
        param_float(&self.params, key, default)
    }

    fn flag(&self, key: &str, default: bool) -> bool {
        match self.params.get(key) {
            Some(Param::Bool(b)) => *b,
            _ => default,
        }
    }

    /// Compact `key=value` listing, in key order.
    pub fn describe(&self) -> String {
        describe_params(&self.params)
    }
}

pub(crate) fn check_params(owner: &str, params: &Params, allowed: &[(&str, Domain)]) -> Result<()> {
    for (key, value) in params {
        let Some((_, domain)) = allowed.iter().find(|(k, _)| k == key) else {
            return Err(Error::Config(format!("{owner} does not take parameter {key:?}")));
        };
        let ok = match (domain, value) {
            (Domain::Labels(labels), Param::Text(s)) => labels.contains(&s.as_str()),
            (Domain::Int(lo, hi), Param::Int(i)) => (lo..=hi).contains(&i),
            (Domain::NonNegative, v) => v.as_f64().is_some_and(|x| x >= 0.0 && x.is_finite()),
            (Domain::Positive, v) => v.as_f64().is_some_and(|x| x > 0.0 && x.is_finite()),
            (Domain::UnitInterval, v) => v.as_f64().is_some_and(|x| x > 0.0 && x <= 1.0),
            (Domain::Flag, Param::Bool(_)) => true,
            (Domain::FeatureCount, Param::Text(s)) => s == "sqrt" || s == "all",
            (Domain::FeatureCount, Param::Int(i)) => *i >= 1,
            _ => false,
        };
        if !ok {
            return Err(Error::Config(format!("invalid value {value} for {owner} parameter {key:?}")));
        }
    }
    Ok(())
}

pub(crate) fn param_text(params: &Params, key: &str, default: &str) -> String {
    match params.get(key) {
        Some(Param::Text(s)) => s.clone(),
        _ => default.to_string(),
    }
}

pub(crate) fn param_int(params: &Params, key: &str, default: usize) -> usize {
    match params.get(key) {
        Some(Param::Int(i)) => *i as usize,
        _ => default,
    }
}

pub(crate) fn param_float(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).and_then(Param::as_f64).unwrap_or(default)
}

/// Compact `key=value` listing, in key order.
pub fn describe_params(params: &Params) -> String {
    let parts: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if parts.is_empty() {
        "default".into()
    } else {
        parts.join(";")
    }
}

/// Cartesian product of parameter axes, the last axis varying fastest.
pub(crate) fn product(axes: &[(&str, Vec<Param>)]) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for (key, values) in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.to_string(), v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

/// The hyperparameter grid searched for each classifier.
pub fn table_grid(kind: ClassifierKind) -> Vec<Params> {
    let text = |xs: &[&str]| xs.iter().map(|&s| Param::from(s)).collect::<Vec<_>>();
    let ints = |xs: &[i64]| xs.iter().map(|&v| Param::Int(v)).collect::<Vec<_>>();
    match kind {
        ClassifierKind::Nb => vec![Params::new()],
        ClassifierKind::Lr => product(&[
            ("regularizer", text(&["l1", "l2", "elasticnet"])),
            ("optimizer", text(&["newton-cg", "lbfgs", "liblinear"])),
        ]),
        ClassifierKind::Svm => product(&[
            ("regularizer", text(&["l1", "l2"])),
            ("loss", text(&["hinge", "squared-hinge"])),
        ]),
        ClassifierKind::Dt => product(&[
            ("criterion", text(&["gini", "entropy"])),
            ("maxdepth", ints(&(1..=10).collect::<Vec<_>>())),
        ]),
        ClassifierKind::Rf => product(&[("estimators", ints(&[10, 20, 50, 100, 200]))]),
        ClassifierKind::Gbt => product(&[
            ("loss", text(&["deviance", "exponential"])),
            ("learning_rate", [0.001, 0.01, 0.1].iter().map(|&v| Param::Float(v)).collect()),
            ("estimators", ints(&[10, 20, 50])),
        ]),
        ClassifierKind::Mlp => product(&[
            ("activation", text(&["logistic", "tanh", "relu"])),
            ("solver", text(&["adam", "sgd"])),
        ]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelState {
    Nb(GaussianNb),
    Linear(LinearModel),
    Tree(Tree),
    Forest(Forest),
    Boosted(Boosted),
    Mlp(Network),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub config: ClassifierConfig,
    pub feature_names: Vec<String>,
    pub state: ModelState,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

const MODEL_FORMAT: &str = "fraudkit-model";
const MODEL_VERSION: u32 = 1;

/// Fits on a fully numeric labelled dataset.
pub fn fit(config: &ClassifierConfig, train: &Dataset) -> Result<TrainedModel> {
    let x = train.numeric_matrix()?;
    let y = train.labels()?;
    fit_matrix(config, &x, y, train.schema.names())
}

pub fn fit_matrix(config: &ClassifierConfig, x: &[Vec<f64>], y: &[u8], feature_names: Vec<String>) -> Result<TrainedModel> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = feature_names.len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if d == 0 {
        return Err(Error::Precondition("no features".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Precondition("training data must contain both classes".into()));
    }
    let c = config;
    let state = match c.kind {
        ClassifierKind::Nb => ModelState::Nb(GaussianNb::fit(x, y)),
        ClassifierKind::Lr | ClassifierKind::Svm => {
            let penalty = match c.text("regularizer", "l2").as_str() {
                "l1" => Penalty::L1,
                "elasticnet" => Penalty::Elasticnet,
                _ => Penalty::L2,
            };
            let params = linear::SolverParams {
                penalty,
                alpha: c.float("alpha", 1e-3),
                max_iter: c.int("max_iter", 2000),
                tol: 1e-8,
            };
            if c.kind == ClassifierKind::Lr {
                ModelState::Linear(linear::fit_logistic(x, y, &params))
            } else {
                let loss = if c.text("loss", "squared-hinge") == "hinge" {
                    SvmLoss::Hinge
                } else {
                    SvmLoss::SquaredHinge
                };
                ModelState::Linear(linear::fit_svm(x, y, loss, &params))
            }
        }
        ClassifierKind::Dt => {
            let params = tree_params(c, 5, None);
            let all: Vec<usize> = (0..x.len()).collect();
            ModelState::Tree(tree::grow_classifier(x, y, &all, &params, c.seed))
        }
        ClassifierKind::Rf => {
            let max_features = match c.params.get("max_features") {
                Some(Param::Text(s)) if s == "all" => None,
                Some(Param::Int(m)) => Some(*m as usize),
                _ => Some(((d as f64).sqrt().floor() as usize).max(1)),
            };
            let params = ensemble::ForestParams {
                estimators: c.int("estimators", 100),
                tree: tree_params(c, 10, max_features),
                bootstrap: c.flag("bootstrap", true),
            };
            ModelState::Forest(ensemble::fit_forest(x, y, &params, c.seed))
        }
        ClassifierKind::Gbt => {
            let params = ensemble::BoostParams {
                loss: if c.text("loss", "deviance") == "exponential" {
                    BoostLoss::Exponential
                } else {
                    BoostLoss::Deviance
                },
                learning_rate: c.float("learning_rate", 0.1),
                estimators: c.int("estimators", 50),
                max_depth: c.int("maxdepth", 3),
            };
            ModelState::Boosted(ensemble::fit_boosted(x, y, &params))
        }
        ClassifierKind::Mlp => ModelState::Mlp(fit_mlp(c, x, y, d)?),
    };
    Ok(TrainedModel {
        kind: c.kind,
        config: c.clone(),
        feature_names,
        state,
    })
}

fn tree_params(c: &ClassifierConfig, default_depth: usize, max_features: Option<usize>) -> tree::TreeParams {
    tree::TreeParams {
        criterion: if c.text("criterion", "gini") == "entropy" {
            Criterion::Entropy
        } else {
            Criterion::Gini
        },
        max_depth: c.int("maxdepth", default_depth),
        min_samples_split: 2,
        max_features,
    }
}

fn fit_mlp(c: &ClassifierConfig, x: &[Vec<f64>], y: &[u8], d: usize) -> Result<Network> {
    let activation = match c.text("activation", "relu").as_str() {
        "logistic" => Activation::Logistic,
        "tanh" => Activation::Tanh,
        _ => Activation::Relu,
    };
    let optimizer = if c.text("solver", "adam") == "sgd" { Optimizer::Sgd } else { Optimizer::Adam };
    let spec = NetworkSpec::new(
        d,
        vec![LayerSpec::new(d, activation), LayerSpec::new(1, Activation::Logistic)],
        Loss::BinaryCrossEntropy,
    );
    let net = Network::init(&spec, rng::derive(c.seed, 1))?;
    let default_lr = if optimizer == Optimizer::Sgd { 0.1 } else { 0.01 };
    let cfg = TrainConfig {
        optimizer,
        learning_rate: c.float("learning_rate", default_lr),
        epochs: c.int("epochs", 100),
        batch_size: c.int("batch_size", 32),
        seed: rng::derive(c.seed, 2),
        weight_clip: None,
    };
    let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v as f64]).collect();
    let (net, _) = neural::train(net, x, &targets, &cfg)?;
    Ok(net)
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_width(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    pub fn proba_row(&self, row: &[f64]) -> Result<f64> {
        self.check_width(row)?;
        Ok(match &self.state {
            ModelState::Nb(nb) => nb.predict_proba(row),
            ModelState::Linear(m) => neural::sigmoid(m.score(row)),
            ModelState::Tree(t) => t.predict_value(row),
            ModelState::Forest(f) => f.vote_fraction(row),
            ModelState::Boosted(b) => b.probability(b.raw_score(row)),
            ModelState::Mlp(net) => net.forward(&[row.to_vec()])?[0][0],
        })
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let ModelState::Mlp(net) = &self.state {
            for r in rows {
                self.check_width(r)?;
            }
            if rows.is_empty() {
                return Ok(Vec::new());
            }
            return Ok(net.forward(rows)?.into_iter().map(|r| r[0]).collect());
        }
        rows.iter().map(|r| self.proba_row(r)).collect()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        Ok(self.predict_proba(rows)?.into_iter().map(|p| u8::from(p >= THRESHOLD)).collect())
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<u8>> {
        self.predict(&data.numeric_matrix()?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Data(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedModel::from_json(&text)
    }
}

pub fn extract_rules(model: &TrainedModel) -> Result<Vec<Rule>> {
    match &model.state {
        ModelState::Tree(t) => Ok(rules::tree_rules(t, &model.feature_names)),
        _ => Err(Error::Unsupported(format!("rule extraction needs a dt model, got {}", model.kind))),
    }
}

/// One rule per line, numbered from 1.
pub fn render_rules(rules: &[Rule]) -> String {
    rules.iter().enumerate().map(|(i, r)| format!("{}\t{r}\n", i + 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    fn xor() -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
    }

    #[test]
    fn dt_depth_two_solves_xor() {
        let (x, y) = xor();
        let m = fit_matrix(&ClassifierConfig::new(ClassifierKind::Dt).with("maxdepth", 2), &x, &y, names(2)).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        let rules = extract_rules(&m).unwrap();
        assert_eq!(rules.len(), 4);
        assert!(rules.iter().all(|r| r.conditions.len() == 2 && r.support == 1 && r.purity == 1.0));
    }

    #[test]
    fn stump_yields_two_rules() {
        let x = vec![vec![0.1], vec![0.4], vec![0.6], vec![0.9]];
        let y = vec![0, 0, 1, 1];
        let m = fit_matrix(&ClassifierConfig::new(ClassifierKind::Dt).with("maxdepth", 1), &x, &y, vec!["x".into()]).unwrap();
        let text = render_rules(&extract_rules(&m).unwrap());
        assert_eq!(text, "1\tIF x ≤ 0.5 THEN Negative Class\n2\tIF x > 0.5 THEN Positive Class\n");
    }

    #[test]
    fn zero_linear_model_gives_half() {
        let (x, y) = xor();
        let mut m = fit_matrix(&ClassifierConfig::new(ClassifierKind::Lr), &x, &y, names(2)).unwrap();
        m.state = ModelState::Linear(LinearModel {
            bias: 0.0,
            coefficients: vec![0.0, 0.0],
        });
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p == 0.5));
        assert_eq!(m.predict(&x).unwrap(), vec![1; 4]);
    }

    #[test]
    fn gbt_with_zero_rate_predicts_base_rate() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i < 3)).collect();
        let cfg = ClassifierConfig::new(ClassifierKind::Gbt).with("learning_rate", 0.0);
        let m = fit_matrix(&cfg, &x, &y, names(1)).unwrap();
        let ModelState::Boosted(b) = &m.state else { panic!() };
        let log_odds = (0.3f64 / 0.7).ln();
        for row in &x {
            assert!((b.raw_score(row) - log_odds).abs() < 1e-12);
        }
        assert!(m.predict_proba(&x).unwrap().iter().all(|p| (p - 0.3).abs() < 1e-12));
    }

    #[test]
    fn single_class_and_bad_config_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let cfg = ClassifierConfig::new(ClassifierKind::Dt);
        assert!(matches!(fit_matrix(&cfg, &x, &[1, 1], names(1)), Err(Error::Precondition(_))));
        let bad = ClassifierConfig::new(ClassifierKind::Dt).with("criterion", "mse");
        assert!(matches!(fit_matrix(&bad, &x, &[0, 1], names(1)), Err(Error::Config(_))));
        let unknown = ClassifierConfig::new(ClassifierKind::Nb).with("maxdepth", 2);
        assert!(matches!(unknown.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rules_are_rejected_for_other_kinds() {
        let (x, y) = xor();
        let m = fit_matrix(&ClassifierConfig::new(ClassifierKind::Nb), &x, &y, names(2)).unwrap();
        assert!(matches!(extract_rules(&m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let (x, y) = xor();
        let m = fit_matrix(&ClassifierConfig::new(ClassifierKind::Nb), &x, &y, names(2)).unwrap();
        assert!(matches!(m.predict(&[vec![0.0]]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = ClassifierKind::ALL.iter().map(|&k| table_grid(k).len()).collect();
        assert_eq!(sizes, [1, 9, 4, 20, 5, 18, 6]);
        for k in ClassifierKind::ALL {
            for p in table_grid(k) {
                let cfg = ClassifierConfig {
                    kind: k,
                    params: p,
                    seed: 0,
                };
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = xor();
        for kind in ClassifierKind::ALL {
            let cfg = ClassifierConfig::new(kind).with_seed(3);
            let cfg = if kind == ClassifierKind::Rf { cfg.with("estimators", 3) } else { cfg };
            let cfg = if kind == ClassifierKind::Mlp { cfg.with("epochs", 2) } else { cfg };
            let m = fit_matrix(&cfg, &x, &y, names(2)).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict_proba(&x).unwrap(), m.predict_proba(&x).unwrap(), "{kind}");
        }
    }
}
