//! Pipeline stages. Each one reads its inputs from memory or from the
//! artifacts an earlier stage left in the output directory, so the command
//! line can run any of them on its own.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AtStage, ExperimentConfig, PipelineKind, StageError, StageResult, REPORT_FORMAT, REPORT_VERSION};
use crate::classify::{self, Bound, ClassifierKind, Params, Rule, TrainedModel};
use crate::counterfactual::{self, CfMethod, CfQuery, CfSet, CfSpace, GeneticParams};
use crate::data::{self, Cell, Dataset, FeatureSchema, NormParams, OneHotMap};
use crate::error::{Error, Result};
use crate::evaluate::{self, CvResult, FoldMetrics};
use crate::explain::{self, ExplainMethod};
use crate::occ::{self, DetectorConfig, DetectorKind, TrainedDetector};
use crate::resample::{self, BalanceManifest, BalanceMethod};
use crate::rng;

pub const PREP_DIR: &str = "prep";
pub const BALANCED_DIR: &str = "balanced";
pub const RESULTS_FILE: &str = "results.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Named stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prep,
    Balance,
    Train,
    Report,
    Explain,
    Cf,
    Occ,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Prep,
        Stage::Balance,
        Stage::Train,
        Stage::Report,
        Stage::Explain,
        Stage::Cf,
        Stage::Occ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prep => "prep",
            Stage::Balance => "balance",
            Stage::Train => "train",
            Stage::Report => "report",
            Stage::Explain => "explain",
            Stage::Cf => "cf",
            Stage::Occ => "occ",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }

    pub fn applies_to(self, pipeline: PipelineKind) -> bool {
        match self {
            Stage::Prep => true,
            Stage::Occ => pipeline == PipelineKind::Occ,
            _ => pipeline == PipelineKind::Binary,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Data(e.to_string()))
}

fn slug(label: &str) -> String {
    label.to_ascii_lowercase()
}

/// Data after cleansing, encoding, splitting and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub pipeline: PipelineKind,
    pub train: Dataset,
    pub test: Dataset,
    pub onehot: OneHotMap,
    pub norm: NormParams,
    /// Row positions in the cleansed source, for reporting.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Encoding {
    pipeline: PipelineKind,
    onehot: OneHotMap,
    norm: NormParams,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
}

impl Prepared {
    /// Writes `train.csv`, `test.csv`, `schema.json` and `encoding.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        data::save_csv(&self.train, dir.join("train.csv"))?;
        data::save_csv(&self.test, dir.join("test.csv"))?;
        self.train.schema.save(dir.join("schema.json"))?;
        write_json(
            &dir.join("encoding.json"),
            &Encoding {
                pipeline: self.pipeline,
                onehot: self.onehot.clone(),
                norm: self.norm.clone(),
                train_indices: self.train_indices.clone(),
                test_indices: self.test_indices.clone(),
            },
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Prepared> {
        let dir = dir.as_ref();
        let schema = FeatureSchema::load(dir.join("schema.json"))?;
        let enc: Encoding = read_json(&dir.join("encoding.json"))?;
        Ok(Prepared {
            pipeline: enc.pipeline,
            train: data::load_csv(dir.join("train.csv"), &schema, Some(data::LABEL_COLUMN))?,
            test: data::load_csv(dir.join("test.csv"), &schema, Some(data::LABEL_COLUMN))?,
            onehot: enc.onehot,
            norm: enc.norm,
            train_indices: enc.train_indices,
            test_indices: enc.test_indices,
        })
    }
}

fn load_source(cfg: &ExperimentConfig) -> StageResult<Dataset> {
    let schema = FeatureSchema::load(&cfg.schema).at("prep")?;
    let raw = data::load_csv(&cfg.dataset, &schema, Some(&cfg.label_column)).at("prep")?;
    data::cleanse(&raw, cfg.null_threshold).at("prep")
}

/// Encoding, split and normalization, with the scaling fitted on the
/// training side only.
pub fn prepare(cfg: &ExperimentConfig) -> StageResult<Prepared> {
    let clean = load_source(cfg)?;
    let (encoded, onehot) = data::encode_one_hot(&clean).at("prep")?;
    let split = match cfg.pipeline {
        PipelineKind::Binary => data::stratified_split(&encoded, cfg.train_fraction, rng::derive(cfg.seed, 1)),
        PipelineKind::Occ => data::occ_split(&encoded),
    }
    .at("prep")?;
    let norm = data::fit_normalize(&split.train).at("prep")?;
    Ok(Prepared {
        pipeline: cfg.pipeline,
        train: data::apply_normalize(&split.train, &norm).at("prep")?,
        test: data::apply_normalize(&split.test, &norm).at("prep")?,
        onehot,
        norm,
        train_indices: split.train_indices,
        test_indices: split.test_indices,
    })
}

/// Reloads the prep artifacts and checks they belong to this pipeline.
pub fn load_prepared(cfg: &ExperimentConfig) -> StageResult<Prepared> {
    let dir = cfg.output.join(PREP_DIR);
    if !dir.is_dir() {
        return Err(Error::Data(format!("no prepared data in {}; run the prep stage first", dir.display()))).at("prep");
    }
    let prep = Prepared::load(&dir).at("prep")?;
    if prep.pipeline != cfg.pipeline {
        return Err(Error::Config(format!(
            "{} holds {:?} artifacts but the config runs {:?}",
            dir.display(),
            prep.pipeline,
            cfg.pipeline
        )))
        .at("prep");
    }
    Ok(prep)
}

/// Order-sensitive fingerprint of a dataset's rows and labels.
pub fn row_hash(data: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    for row in &data.rows {
        for c in row {
            match c {
                Cell::Num(v) => v.to_bits().hash(&mut h),
                Cell::Cat(k) => k.hash(&mut h),
                Cell::Null => u64::MAX.hash(&mut h),
            }
        }
    }
    data.labels.hash(&mut h);
    h.finish()
}

/// One balanced training set. `manifest` is absent for the unbalanced one.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub method: BalanceMethod,
    pub data: Dataset,
    pub manifest: Option<BalanceManifest>,
}

fn balanced_path(out: &Path, method: BalanceMethod, ext: &str) -> PathBuf {
    out.join(BALANCED_DIR).join(format!("{}.{ext}", slug(method.label())))
}

/// Balances the training side once per configured method. The test side is
/// fingerprinted before and after to prove it was not touched.
pub fn balance_stage(cfg: &ExperimentConfig, prep: &Prepared) -> StageResult<Vec<Balanced>> {
    let test_hash = row_hash(&prep.test);
    let mut out = Vec::new();
    for method in cfg.balance_methods() {
        let b = if method == BalanceMethod::None {
            Balanced {
                method,
                data: prep.train.clone(),
                manifest: None,
            }
        } else {
            let bc = cfg.balancer.config(method, rng::derive(cfg.seed, 2));
            let (data, manifest) = resample::balance(&prep.train, &bc).at("balance")?;
            log::info!(
                "{}: {}/{} -> {}/{} (negatives/positives)",
                method.label(),
                manifest.negatives_before,
                manifest.positives_before,
                manifest.negatives_after,
                manifest.positives_after
            );
            Balanced {
                method,
                data,
                manifest: Some(manifest),
            }
        };
        if row_hash(&prep.test) != test_hash {
            return Err(Error::Precondition("the test partition changed during balancing".into())).at("balance");
        }
        out.push(b);
    }
    Ok(out)
}

pub fn save_balanced(out: &Path, sets: &[Balanced]) -> Result<()> {
    for b in sets {
        if let Some(m) = &b.manifest {
            fs::create_dir_all(out.join(BALANCED_DIR)).map_err(|e| Error::io(out.join(BALANCED_DIR), e))?;
            data::save_csv(&b.data, balanced_path(out, b.method, "csv"))?;
            m.save(balanced_path(out, b.method, "manifest.json"))?;
        }
    }
    Ok(())
}

pub fn load_balanced(cfg: &ExperimentConfig, prep: &Prepared) -> StageResult<Vec<Balanced>> {
    cfg.balance_methods()
        .into_iter()
        .map(|method| {
            if method == BalanceMethod::None {
                return Ok(Balanced {
                    method,
                    data: prep.train.clone(),
                    manifest: None,
                });
            }
            let path = balanced_path(&cfg.output, method, "csv");
            let data = data::load_csv(&path, &prep.train.schema, Some(data::LABEL_COLUMN))?;
            let manifest = read_json(&balanced_path(&cfg.output, method, "manifest.json"))?;
            Ok(Balanced {
                method,
                data,
                manifest: Some(manifest),
            })
        })
        .collect::<Result<Vec<_>>>()
        .at("balance")
}

/// Test-set result for one (model, balancer) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ClassifierKind,
    pub balancer: BalanceMethod,
    pub params: Params,
    pub test: FoldMetrics,
    pub cv: CvResult,
}

/// Trained cells; `models[i]` belongs to `cells[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub cells: Vec<CellResult>,
    pub models: Vec<TrainedModel>,
}

pub fn model_file(kind: ClassifierKind, method: BalanceMethod) -> String {
    format!("models/{}-{}.json", slug(kind.label()), slug(method.label()))
}

impl TrainOutput {
    pub fn save(&self, out: &Path) -> Result<()> {
        for (c, m) in self.cells.iter().zip(&self.models) {
            write_text(&out.join(model_file(c.model, c.balancer)), &(m.to_json()? + "\n"))?;
        }
        write_json(&out.join(RESULTS_FILE), &self.cells)
    }

    pub fn load(out: &Path) -> Result<TrainOutput> {
        let cells: Vec<CellResult> = read_json(&out.join(RESULTS_FILE))?;
        let models = cells
            .iter()
            .map(|c| TrainedModel::load(out.join(model_file(c.model, c.balancer))))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainOutput { cells, models })
    }

    pub fn find(&self, kind: ClassifierKind, method: BalanceMethod) -> Option<&TrainedModel> {
        self.cells
            .iter()
            .position(|c| c.model == kind && c.balancer == method)
            .map(|i| &self.models[i])
    }
}

/// Grid-searches every template under every balancer. Folds come from the
/// unbalanced training side with the balancer applied inside each fold; the
/// winner is refitted on the balanced training side and scored on the test
/// side.
pub fn train_stage(cfg: &ExperimentConfig, prep: &Prepared, balanced: &[Balanced]) -> StageResult<TrainOutput> {
    let mut out = TrainOutput {
        cells: Vec::new(),
        models: Vec::new(),
    };
    let cv_seed = rng::derive(cfg.seed, 3);
    for b in balanced {
        let fold_balancer =
            (b.method != BalanceMethod::None).then(|| cfg.balancer.config(b.method, rng::derive(cfg.seed, 4)));
        for t in cfg.classifier_templates() {
            let grid = t.points().at("train")?;
            let cv = evaluate::grid_search(t.kind, &grid, &prep.train, cfg.cv_folds, cv_seed, fold_balancer.as_ref())
                .at("train")?;
            let config = cv.best_config();
            let model = classify::fit(&config, &b.data).at("train")?;
            let test = evaluate::score_model(&model, &prep.test).at("train")?;
            log::info!(
                "{} / {}: test auc {:.4}, cv auc {:.4}",
                t.kind,
                b.method.label(),
                test.auc,
                cv.best().mean_auc
            );
            out.cells.push(CellResult {
                model: t.kind,
                balancer: b.method,
                params: config.params.clone(),
                test,
                cv,
            });
            out.models.push(model);
        }
    }
    Ok(out)
}

/// Writes `metrics.csv`, the table-shaped `auc.csv`, `sensitivity.csv` and
/// `specificity.csv`, `ttest.csv` and, when a tree was trained, `rules.txt`.
/// Rule thresholds are shown in original units.
pub fn report_stage(cfg: &ExperimentConfig, trained: &TrainOutput, norm: &NormParams) -> StageResult<()> {
    write_reports(cfg, trained, norm).at("report")
}

fn unscale_rules(rules: &mut [Rule], norm: &NormParams) {
    for c in rules.iter_mut().flat_map(|r| r.conditions.iter_mut()) {
        let f = |v: f64| norm.unscale(c.feature, v);
        c.bound = match c.bound {
            Bound::Le { value } => Bound::Le { value: f(value) },
            Bound::Gt { value } => Bound::Gt { value: f(value) },
            Bound::Between { low, high } => Bound::Between { low: f(low), high: f(high) },
        };
    }
}

fn write_reports(cfg: &ExperimentConfig, trained: &TrainOutput, norm: &NormParams) -> Result<()> {
    let out = &cfg.output;
    let cells = &trained.cells;
    let mut long = csv::Writer::from_writer(Vec::new());
    long.write_record(["model", "balancer", "auc", "sensitivity", "specificity", "cv_auc", "params"])?;
    for c in cells {
        long.write_record([
            c.model.label().to_string(),
            c.balancer.label().to_string(),
            format!("{:.4}", c.test.auc),
            format!("{:.4}", c.test.sensitivity),
            format!("{:.4}", c.test.specificity),
            format!("{:.4}", c.cv.best().mean_auc),
            classify::describe_params(&c.params),
        ])?;
    }
    let bytes = long.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_text(&out.join("metrics.csv"), &String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))?)?;

    let mut kinds: Vec<ClassifierKind> = Vec::new();
    let mut methods: Vec<BalanceMethod> = Vec::new();
    for c in cells {
        if !kinds.contains(&c.model) {
            kinds.push(c.model);
        }
        if !methods.contains(&c.balancer) {
            methods.push(c.balancer);
        }
    }
    let columns: Vec<String> = methods.iter().map(|m| m.label().to_string()).collect();
    type Metric = fn(&FoldMetrics) -> f64;
    let metrics: [(&str, Metric); 3] = [
        ("auc", |m| m.auc),
        ("sensitivity", |m| m.sensitivity),
        ("specificity", |m| m.specificity),
    ];
    for (name, get) in metrics {
        let rows: Vec<(String, Vec<Option<f64>>)> = kinds
            .iter()
            .map(|&k| {
                let values = methods
                    .iter()
                    .map(|&m| cells.iter().find(|c| c.model == k && c.balancer == m).map(|c| get(&c.test)))
                    .collect();
                (k.label().to_string(), values)
            })
            .collect();
        let text = csv_text(|buf| evaluate::write_metric_table(&columns, &rows, buf))?;
        write_text(&out.join(format!("{name}.csv")), &text)?;
    }

    // fold AUCs under the first balancer feed the t-tests
    let focus = methods.first().copied();
    let pairs: Vec<(ClassifierKind, ClassifierKind)> = if cfg.ttest.is_empty() {
        (0..kinds.len())
            .flat_map(|i| (i + 1..kinds.len()).map(move |j| (i, j)))
            .map(|(i, j)| (kinds[i], kinds[j]))
            .collect()
    } else {
        cfg.ttest.clone()
    };
    let fold_aucs = |k: ClassifierKind| {
        cells
            .iter()
            .find(|c| c.model == k && Some(c.balancer) == focus)
            .map(|c| c.cv.best().aucs())
            .unwrap_or_default()
    };
    let mut rows = Vec::new();
    for (a, b) in pairs {
        let name = format!("{} vs {}", a.label(), b.label());
        match evaluate::paired_t_test(&fold_aucs(a), &fold_aucs(b)) {
            Ok(t) => rows.push((name, t)),
            Err(e) => log::warn!("t-test {name} skipped: {e}"),
        }
    }
    write_text(&out.join("ttest.csv"), &csv_text(|buf| evaluate::write_ttest_csv(&rows, buf))?)?;

    let mut rules = String::new();
    for (c, m) in cells.iter().zip(&trained.models) {
        if c.model == ClassifierKind::Dt {
            rules.push_str(&format!("# {} / {}\n", c.model.label(), c.balancer.label()));
            let mut extracted = classify::extract_rules(m)?;
            unscale_rules(&mut extracted, norm);
            rules.push_str(&classify::render_rules(&extracted));
        }
    }
    if !rules.is_empty() {
        write_text(&out.join("rules.txt"), &rules)?;
    }
    Ok(())
}

const TREE_KINDS: [ClassifierKind; 3] = [ClassifierKind::Dt, ClassifierKind::Rf, ClassifierKind::Gbt];

/// The model to explain or query: the requested kind, else the first tree
/// model, else the first trained one; always under the first balancer.
pub fn pick_model<'a>(
    trained: &'a TrainOutput,
    want: Option<ClassifierKind>,
    stage: &'static str,
) -> StageResult<&'a TrainedModel> {
    let focus = trained.cells.first().map(|c| c.balancer);
    let kinds: Vec<ClassifierKind> = trained.cells.iter().map(|c| c.model).collect();
    let kind = want
        .or_else(|| kinds.iter().copied().find(|k| TREE_KINDS.contains(k)))
        .or_else(|| kinds.first().copied());
    kind.zip(focus)
        .and_then(|(k, m)| trained.find(k, m))
        .ok_or_else(|| StageError {
            stage,
            source: Error::Config("the requested model is not among the trained classifiers".into()),
        })
}

/// Writes `shap_summary.csv` (global importance), `shap_values.csv`,
/// `shap_long.csv` and `redundancy.json`.
pub fn explain_stage(cfg: &ExperimentConfig, model: &TrainedModel, prep: &Prepared) -> StageResult<()> {
    write_explanations(cfg, model, prep).at("explain")
}

fn write_explanations(cfg: &ExperimentConfig, model: &TrainedModel, prep: &Prepared) -> Result<()> {
    let s = &cfg.explain;
    let out = &cfg.output;
    let train = prep.train.numeric_matrix()?;
    let test = prep.test.numeric_matrix()?;
    let background = explain::sample_background(&train, s.background.max(1), rng::derive(cfg.seed, 5));
    let rows: Vec<Vec<f64>> = test.iter().take(s.rows.max(1)).cloned().collect();
    let method = s.method.unwrap_or(if TREE_KINDS.contains(&model.kind) {
        ExplainMethod::Tree
    } else {
        ExplainMethod::Sampling
    });
    let shap = explain::explain(model, &rows, &background, method, s.permutations.max(1), rng::derive(cfg.seed, 6))?;
    write_text(&out.join("shap_summary.csv"), &csv_text(|buf| explain::write_importance_csv(&shap, buf))?)?;
    write_text(&out.join("shap_values.csv"), &csv_text(|buf| shap.write_csv(buf))?)?;
    let records = explain::summary_export(&shap, &rows)?;
    write_text(&out.join("shap_long.csv"), &csv_text(|buf| explain::write_summary_csv(&records, buf))?)?;
    if shap.feature_names.len() >= 2 && shap.values.len() >= 3 {
        write_json(&out.join("redundancy.json"), &explain::redundancy_distances(&shap)?)?;
    }
    Ok(())
}

/// Counterfactual space over the normalized encoded columns.
pub fn cf_space(prep: &Prepared) -> Result<CfSpace> {
    CfSpace::new(&prep.train.schema, &prep.train.numeric_matrix()?)
}

/// Runs the configured counterfactual method on one query.
pub fn generate(
    model: &TrainedModel,
    space: &CfSpace,
    query: &CfQuery,
    method: CfMethod,
    max_attempts: usize,
    reference: &[Vec<f64>],
) -> Result<CfSet> {
    match method {
        CfMethod::Random => counterfactual::generate_random(model, space, query, max_attempts),
        CfMethod::Kdtree => counterfactual::generate_kdtree(model, space, query, reference),
        CfMethod::Genetic => counterfactual::generate_genetic(model, space, query, GeneticParams::default()),
    }
}

/// Writes `cf_report.txt`: counterfactuals for the first test rows, rows
/// predicted as fraud first, shown in original units.
pub fn cf_stage(cfg: &ExperimentConfig, model: &TrainedModel, prep: &Prepared) -> StageResult<()> {
    let text = counterfactual_report(cfg, model, prep).at("cf")?;
    write_text(&cfg.output.join("cf_report.txt"), &text).at("cf")
}

fn counterfactual_report(cfg: &ExperimentConfig, model: &TrainedModel, prep: &Prepared) -> Result<String> {
    let s = &cfg.counterfactual;
    let space = cf_space(prep)?;
    let train = prep.train.numeric_matrix()?;
    let test = prep.test.numeric_matrix()?;
    let preds = model.predict(&test)?;
    let mut order: Vec<usize> = (0..test.len()).filter(|&i| preds[i] == 1).collect();
    order.extend((0..test.len()).filter(|&i| preds[i] == 0));
    let display = CfSpace::new(&prep.onehot.encoded, &[])
        .or_else(|_| CfSpace::new(&invert_schema(&prep.train.schema, &prep.norm), &invert_rows(&train, &prep.norm)))?;
    let mut out = String::new();
    for (q, &i) in order.iter().take(s.queries).enumerate() {
        let original = preds[i];
        let query = CfQuery {
            instance: test[i].clone(),
            desired_class: 1 - original,
            total_cfs: s.total_cfs,
            features_to_vary: None,
            permitted_ranges: Default::default(),
            proximity_weight: s.proximity_weight,
            diversity_weight: s.diversity_weight,
            seed: rng::derive(cfg.seed, 100 + q as u64),
        };
        let set = generate(model, &space, &query, s.method, s.max_attempts, &train)?;
        let mut shown = set.clone();
        for c in shown.counterfactuals.iter_mut() {
            prep.norm.invert_row(&mut c.row);
        }
        let mut instance = test[i].clone();
        prep.norm.invert_row(&mut instance);
        out.push_str(&format!("## query {} (source row {})\n", q + 1, prep.test_indices[i]));
        out.push_str(&counterfactual::cf_report(&display, &instance, original, 1 - original, &shown));
        if !set.counterfactuals.is_empty() {
            let imp = counterfactual::local_importance(&space, &test[i], &set)?;
            let parts: Vec<String> = imp.iter().map(|(n, v)| format!("{n}: {v:.2}")).collect();
            out.push_str(&format!("local importance: {}\n", parts.join(", ")));
        }
        out.push('\n');
    }
    Ok(out)
}

fn invert_schema(schema: &FeatureSchema, norm: &NormParams) -> FeatureSchema {
    let mut s = schema.clone();
    for (j, f) in s.features.iter_mut().enumerate() {
        if let Some((lo, hi)) = f.range {
            f.range = Some((norm.unscale(j, lo), norm.unscale(j, hi)));
        }
    }
    s
}

fn invert_rows(rows: &[Vec<f64>], norm: &NormParams) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            norm.invert_row(&mut r);
            r
        })
        .collect()
}

/// Columns a detector sees. MCD skips one-hot indicators: each group sums
/// to one, so its covariance would be singular by construction.
pub fn detector_columns(cfg: &DetectorConfig, schema: &FeatureSchema) -> Vec<usize> {
    let all: Vec<usize> = (0..schema.len()).collect();
    if cfg.kind != DetectorKind::Mcd {
        return all;
    }
    let continuous: Vec<usize> = all.iter().copied().filter(|&j| schema.features[j].one_hot.is_none()).collect();
    if continuous.is_empty() {
        return all;
    }
    if continuous.len() < all.len() {
        log::info!("mcd: skipping {} one-hot indicator columns", all.len() - continuous.len());
    }
    continuous
}

/// One fitted detector and its classification rate on the positives.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorResult {
    pub label: String,
    pub rate: f64,
    pub detector: TrainedDetector,
}

/// Fits every detector on the negatives and scores the positives. Writes
/// `detectors/*.json` and `cr.csv`.
pub fn occ_stage(cfg: &ExperimentConfig, prep: &Prepared) -> StageResult<Vec<DetectorResult>> {
    let configs = cfg.detector_configs();
    let train = prep.train.numeric_matrix().at("occ")?;
    let test = prep.test.numeric_matrix().at("occ")?;
    let mut results = Vec::new();
    for (i, template) in configs.iter().enumerate() {
        let mut dc = template.clone();
        dc.seed = rng::derive(cfg.seed, 7 + i as u64);
        let columns = detector_columns(&dc, &prep.train.schema);
        let project = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect()
        };
        let names = columns.iter().map(|&j| prep.train.schema.features[j].name.clone()).collect();
        let detector = occ::fit_detector_matrix(&dc, &project(&train), names).at("occ")?;
        let rate = occ::classification_rate(&detector.classify(&project(&test)).at("occ")?).at("occ")?;
        log::info!("{} ({}): CR {rate:.4}", dc.kind, dc.describe());
        let same_kind = configs.iter().filter(|c| c.kind == dc.kind).count();
        let label = if same_kind > 1 {
            format!("{} [{}]", dc.kind.label(), dc.describe())
        } else {
            dc.kind.label().to_string()
        };
        let path = cfg.output.join(format!("detectors/{i:02}-{}.json", slug(dc.kind.label())));
        write_text(&path, &(detector.to_json().at("occ")? + "\n")).at("occ")?;
        results.push(DetectorResult { label, rate, detector });
    }
    let rows: Vec<(String, f64)> = results.iter().map(|r| (r.label.clone(), r.rate)).collect();
    let text = csv_text(|buf| occ::write_cr_csv(&rows, buf)).at("occ")?;
    write_text(&cfg.output.join("cr.csv"), &text).at("occ")?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub pipeline: PipelineKind,
    pub seed: u64,
    pub files: Vec<String>,
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if let Ok(rel) = p.strip_prefix(root) {
            let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if name != MANIFEST_FILE {
                out.push(name);
            }
        }
    }
    Ok(())
}

/// Lists every file in the output directory (sorted) in `manifest.json` and
/// returns the list.
pub fn write_manifest(cfg: &ExperimentConfig) -> StageResult<Vec<String>> {
    let mut files = Vec::new();
    collect_files(&cfg.output, &cfg.output, &mut files).at("report")?;
    let manifest = Manifest {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        pipeline: cfg.pipeline,
        seed: cfg.seed,
        files: files.clone(),
    };
    write_json(&cfg.output.join(MANIFEST_FILE), &manifest).at("report")?;
    Ok(files)
}

/// Runs the pipeline through `last` (everything when `None`), persisting
/// every intermediate artifact, and returns the manifest's file list.
pub fn run_until(cfg: &ExperimentConfig, last: Option<Stage>) -> StageResult<Vec<String>> {
    cfg.validate().at("config")?;
    if let Some(st) = last {
        if !st.applies_to(cfg.pipeline) {
            return Err(Error::Config(format!("stage {} does not apply to a {:?} pipeline", st.name(), cfg.pipeline)))
                .at("config");
        }
    }
    let through = |st: Stage| last.is_none_or(|l| st <= l);
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e)).at("prep")?;
    let prep = prepare(cfg)?;
    prep.save(cfg.output.join(PREP_DIR)).at("prep")?;
    match cfg.pipeline {
        PipelineKind::Occ => {
            if through(Stage::Occ) {
                occ_stage(cfg, &prep)?;
            }
        }
        PipelineKind::Binary => {
            if through(Stage::Balance) {
                let balanced = balance_stage(cfg, &prep)?;
                save_balanced(&cfg.output, &balanced).at("balance")?;
                if through(Stage::Train) {
                    let trained = train_stage(cfg, &prep, &balanced)?;
                    trained.save(&cfg.output).at("train")?;
                    if through(Stage::Report) {
                        report_stage(cfg, &trained, &prep.norm)?;
                    }
                    if through(Stage::Explain) && cfg.explain.enabled {
                        explain_stage(cfg, pick_model(&trained, cfg.explain.model, "explain")?, &prep)?;
                    }
                    if through(Stage::Cf) && cfg.counterfactual.enabled {
                        cf_stage(cfg, pick_model(&trained, cfg.counterfactual.model, "cf")?, &prep)?;
                    }
                }
            }
        }
    }
    write_manifest(cfg)
}

/// Runs the whole configured pipeline.
pub fn run(cfg: &ExperimentConfig) -> StageResult<Vec<String>> {
    run_until(cfg, None)
}

/// Runs one stage on the artifacts earlier stages left in the output
/// directory, then refreshes the manifest.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage, model: Option<&TrainedModel>) -> StageResult<Vec<String>> {
    cfg.validate().at("config")?;
    if !stage.applies_to(cfg.pipeline) {
        return Err(Error::Config(format!("stage {} does not apply to a {:?} pipeline", stage.name(), cfg.pipeline)))
            .at("config");
    }
    match stage {
        Stage::Prep => {
            fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e)).at("prep")?;
            prepare(cfg)?.save(cfg.output.join(PREP_DIR)).at("prep")?;
        }
        Stage::Balance => {
            let prep = load_prepared(cfg)?;
            save_balanced(&cfg.output, &balance_stage(cfg, &prep)?).at("balance")?;
        }
        Stage::Train => {
            let prep = load_prepared(cfg)?;
            let balanced = load_balanced(cfg, &prep)?;
            train_stage(cfg, &prep, &balanced)?.save(&cfg.output).at("train")?;
        }
        Stage::Report => {
            let prep = load_prepared(cfg)?;
            report_stage(cfg, &TrainOutput::load(&cfg.output).at("report")?, &prep.norm)?;
        }
        Stage::Explain | Stage::Cf => {
            let prep = load_prepared(cfg)?;
            let trained;
            let chosen = match model {
                Some(m) => m,
                None => {
                    trained = TrainOutput::load(&cfg.output).at(stage.name())?;
                    let want = if stage == Stage::Explain { cfg.explain.model } else { cfg.counterfactual.model };
                    pick_model(&trained, want, stage.name())?
                }
            };
            if stage == Stage::Explain {
                explain_stage(cfg, chosen, &prep)?;
            } else {
                cf_stage(cfg, chosen, &prep)?;
            }
        }
        Stage::Occ => {
            occ_stage(cfg, &load_prepared(cfg)?)?;
        }
    }
    write_manifest(cfg)
}
