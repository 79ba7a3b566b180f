use std::fs;
use std::path::Path;

use fraudkit::classify::{ClassifierConfig, ClassifierKind};
use fraudkit::data;
use fraudkit::evaluate;
use fraudkit::pipeline::{self, ExperimentConfig, PipelineKind, Prepared, Stage};

fn write_config(dir: &Path, name: &str, body: &str) -> ExperimentConfig {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

fn read_tree(dir: &Path, files: &[String]) -> Vec<(String, Vec<u8>)> {
    files.iter().map(|f| (f.clone(), fs::read(dir.join(f)).unwrap())).collect()
}

#[test]
fn separable_synth_gives_near_perfect_tree() {
    let d = pipeline::synth(600, pipeline::DEFAULT_POSITIVE_FRACTION, 4, 0.0, 5).unwrap();
    let (enc, _) = data::encode_one_hot(&d).unwrap();
    let split = data::stratified_split(&enc, 0.8, 1).unwrap();
    let cfg = ClassifierConfig::new(ClassifierKind::Dt).with("maxdepth", 3);
    let model = fraudkit::classify::fit(&cfg, &split.train).unwrap();
    let m = evaluate::score_model(&model, &split.test).unwrap();
    assert!(m.auc >= 0.99, "{m:?}");
}

#[test]
fn binary_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = pipeline::synth(300, 0.2, 3, 0.6, 9).unwrap();
    pipeline::write_dataset(&d, tmp.path().join("data")).unwrap();
    let body = |out: &str| {
        format!(
            r#"{{
  "dataset": "data/data.csv",
  "schema": "data/schema.json",
  "pipeline": "binary",
  "balancers": ["none", "smote_enn"],
  "classifiers": [
    {{"kind": "dt", "grid": [{{"maxdepth": 2}}, {{"maxdepth": 4}}]}},
    {{"kind": "nb"}},
    {{"kind": "lr"}}
  ],
  "cv_folds": 3,
  "seed": 11,
  "explain": {{"rows": 20, "background": 20}},
  "counterfactual": {{"queries": 2, "total_cfs": 2, "max_attempts": 2000}},
  "output": "{out}"
}}"#
        )
    };
    let a = write_config(tmp.path(), "a.json", &body("out_a"));
    let b = write_config(tmp.path(), "b.json", &body("out_b"));
    let files_a = pipeline::run(&a).unwrap();
    let files_b = pipeline::run(&b).unwrap();
    assert_eq!(files_a, files_b);
    for want in [
        "metrics.csv",
        "auc.csv",
        "sensitivity.csv",
        "specificity.csv",
        "ttest.csv",
        "results.json",
        "prep/train.csv",
        "balanced/smote-enn.csv",
        "rules.txt",
        "shap_summary.csv",
        "cf_report.txt",
        "models/dt-smote-enn.json",
    ] {
        assert!(files_a.iter().any(|f| f == want), "missing {want}: {files_a:?}");
    }
    assert_eq!(read_tree(&a.output, &files_a), read_tree(&b.output, &files_b));
    assert_eq!(fs::read(a.output.join("manifest.json")).unwrap(), fs::read(b.output.join("manifest.json")).unwrap());
    let auc = fs::read_to_string(a.output.join("auc.csv")).unwrap();
    assert!(auc.starts_with("Model,Imbalanced,SMOTE-ENN\n"), "{auc}");
    assert_eq!(auc.lines().count(), 4);
    let ttest = fs::read_to_string(a.output.join("ttest.csv")).unwrap();
    assert_eq!(ttest.lines().count(), 4, "{ttest}");
    let cf = fs::read_to_string(a.output.join("cf_report.txt")).unwrap();
    assert!(cf.contains("query instance"), "{cf}");
}

#[test]
fn occ_run_reports_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let d = pipeline::synth(240, 0.1, 3, 0.0, 2).unwrap();
    pipeline::write_dataset(&d, tmp.path()).unwrap();
    let cfg = write_config(
        tmp.path(),
        "occ.json",
        r#"{
  "dataset": "data.csv",
  "schema": "schema.json",
  "pipeline": "occ",
  "detectors": [{"kind": "iforest"}, {"kind": "copod"}, {"kind": "mcd"}],
  "output": "report"
}"#,
    );
    assert_eq!(cfg.pipeline, PipelineKind::Occ);
    let files = pipeline::run(&cfg).unwrap();
    assert!(files.iter().any(|f| f == "cr.csv"));
    let cr = fs::read_to_string(cfg.output.join("cr.csv")).unwrap();
    assert_eq!(cr.lines().count(), 4, "{cr}");
    for line in cr.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v >= 0.9, "{line}");
    }
}

#[test]
fn stage_errors_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"dataset": "missing.csv", "schema": "missing.json", "pipeline": "binary"}"#,
    );
    let err = pipeline::run(&cfg).unwrap_err();
    assert_eq!(err.stage, "prep");
    assert!(err.to_string().starts_with("prep stage failed"));
    let occ = write_config(
        tmp.path(),
        "occ.json",
        r#"{"dataset": "d.csv", "schema": "s.json", "pipeline": "occ", "balancers": ["smote"]}"#,
    );
    assert_eq!(pipeline::run(&occ).unwrap_err().stage, "config");
}

#[test]
fn prepared_artifacts_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = pipeline::synth(200, 0.15, 3, 0.5, 1).unwrap();
    pipeline::write_dataset(&d, tmp.path()).unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"dataset": "data.csv", "schema": "schema.json", "pipeline": "binary", "output": "o"}"#,
    );
    let prep = pipeline::prepare(&cfg).unwrap();
    prep.save(tmp.path().join("p")).unwrap();
    assert_eq!(Prepared::load(tmp.path().join("p")).unwrap(), prep);
}

#[test]
fn stage_by_stage_matches_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = pipeline::synth(240, 0.2, 3, 0.5, 4).unwrap();
    pipeline::write_dataset(&d, tmp.path()).unwrap();
    let body = |out: &str| {
        format!(
            r#"{{"dataset": "data.csv", "schema": "schema.json", "pipeline": "binary",
  "balancers": ["none", "smote"], "classifiers": [{{"kind": "dt"}}, {{"kind": "lr"}}], "cv_folds": 3, "seed": 2,
  "explain": {{"rows": 10, "background": 10}}, "counterfactual": {{"queries": 1, "total_cfs": 2, "max_attempts": 500}},
  "output": "{out}"}}"#
        )
    };
    let full = write_config(tmp.path(), "full.json", &body("full"));
    let staged = write_config(tmp.path(), "staged.json", &body("staged"));
    let files = pipeline::run(&full).unwrap();
    let mut last = Vec::new();
    for st in [Stage::Prep, Stage::Balance, Stage::Train, Stage::Report, Stage::Explain, Stage::Cf] {
        last = pipeline::run_stage(&staged, st, None).unwrap();
    }
    assert_eq!(files, last);
    assert_eq!(read_tree(&full.output, &files), read_tree(&staged.output, &last));
    assert_eq!(pipeline::run_stage(&staged, Stage::Occ, None).unwrap_err().stage, "config");
}

#[test]
fn missing_artifacts_fail_in_the_stage_that_needs_them() {
    let tmp = tempfile::tempdir().unwrap();
    let d = pipeline::synth(100, 0.2, 2, 0.5, 1).unwrap();
    pipeline::write_dataset(&d, tmp.path()).unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"dataset": "data.csv", "schema": "schema.json", "pipeline": "binary", "balancers": ["smote"], "output": "o"}"#,
    );
    assert_eq!(pipeline::run_stage(&cfg, Stage::Train, None).unwrap_err().stage, "prep");
    pipeline::run_stage(&cfg, Stage::Prep, None).unwrap();
    assert_eq!(pipeline::run_stage(&cfg, Stage::Train, None).unwrap_err().stage, "balance");
    assert_eq!(pipeline::run_stage(&cfg, Stage::Report, None).unwrap_err().stage, "report");
}
