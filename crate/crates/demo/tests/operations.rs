use fraudkit_demo::{anomaly_field, counterfactual, resample, AnomalyResponse, CfResponse, ResampleResponse};
use serde_json::json;

/// Deterministic scatter: 40 negatives in the lower left, 10 positives upper right.
fn cloud() -> (Vec<[f64; 2]>, Vec<u8>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let t = i as f64;
        pts.push([0.1 + 0.3 * ((t * 0.618).fract()), 0.1 + 0.3 * ((t * 0.414).fract())]);
        labels.push(0);
    }
    for i in 0..10 {
        let t = i as f64;
        pts.push([0.6 + 0.3 * ((t * 0.618).fract()), 0.6 + 0.3 * ((t * 0.414).fract())]);
        labels.push(1);
    }
    (pts, labels)
}

#[test]
fn smote_balances_and_marks_synthetic_rows() {
    let (points, labels) = cloud();
    let req = json!({"points": points, "labels": labels, "method": "smote", "seed": 3}).to_string();
    let out: ResampleResponse = serde_json::from_str(&resample(&req).unwrap()).unwrap();
    assert_eq!(out.points.len(), 80);
    assert_eq!(out.synthetic.iter().filter(|s| **s).count(), 30);
    assert_eq!(out.removed, 0);
    for ((p, &l), &s) in out.points.iter().zip(&out.labels).zip(&out.synthetic) {
        if s {
            assert_eq!(l, 1);
            assert!(p[0] >= 0.6 && p[1] >= 0.6, "{p:?}");
        }
    }
    assert_eq!(resample(&req).unwrap(), resample(&req).unwrap());
}

#[test]
fn resample_rejects_bad_requests() {
    let (points, labels) = cloud();
    assert!(resample(&json!({"points": points, "labels": &labels[1..], "method": "smote"}).to_string()).is_err());
    assert!(resample(&json!({"points": [[1.5, 0.0]], "labels": [0], "method": "smote"}).to_string()).is_err());
    assert!(resample(r#"{"points": [], "labels": [], "method": "magic"}"#).is_err());
}

#[test]
fn anomaly_field_scores_far_cells_higher() {
    let (points, _) = cloud();
    let normal: Vec<[f64; 2]> = points[..40].to_vec();
    for detector in ["iforest", "copod", "mcd", "abod"] {
        let req = json!({"points": normal, "detector": detector, "resolution": 10, "seed": 1}).to_string();
        let out: AnomalyResponse = serde_json::from_str(&anomaly_field(&req).unwrap()).unwrap();
        assert_eq!(out.scores.len(), 100);
        assert_eq!(out.flagged.len(), 40);
        // cell (2, 2) sits inside the cloud, cell (9, 9) in the far corner
        assert!(out.scores[99] > out.scores[22], "{detector}");
        assert!(out.scores[99] > out.threshold, "{detector}");
    }
    let big = json!({"points": normal, "detector": "copod", "resolution": 1000}).to_string();
    assert!(anomaly_field(&big).is_err());
}

#[test]
fn counterfactuals_cross_the_boundary() {
    let (points, labels) = cloud();
    for method in ["random", "kdtree", "genetic"] {
        let req = json!({
            "points": points, "labels": labels, "model": "dt", "params": {"maxdepth": 3},
            "query": [0.8, 0.8], "method": method, "total": 3, "resolution": 8, "seed": 5
        })
        .to_string();
        let out: CfResponse = serde_json::from_str(&counterfactual(&req).unwrap()).unwrap();
        assert_eq!(out.predicted, 1, "{method}");
        assert!(!out.counterfactuals.is_empty(), "{method}");
        assert!(out.counterfactuals.len() <= 3);
        for c in &out.counterfactuals {
            assert!(c.probability < 0.5, "{method}: {c:?}");
        }
        assert_eq!(out.field.as_ref().unwrap().len(), 64);
    }
}
