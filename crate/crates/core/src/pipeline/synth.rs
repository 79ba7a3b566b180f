use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fs;
use std::path::Path;

use crate::data::{self, Cell, Dataset, Feature, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng;

/// Positive share of the generated data by default.
pub const DEFAULT_POSITIVE_FRACTION: f64 = 0.122;

/// Name of the categorical feature `synth` injects.
pub const SYNTH_CATEGORICAL: &str = "channel";
pub const SYNTH_CHANNELS: [&str; 3] = ["atm", "pos", "web"];

/// Two-class Gaussian mixture with `d` numeric features and one categorical
/// channel. Negatives are N(0, I). Positives shift their first `ceil(d/2)`
/// features by `8 (1 - difficulty)`, so difficulty 0 gives disjoint clusters
/// and 1 gives identical ones. The channel is immutable and leans toward
/// "web" for positives as difficulty falls.
pub fn synth(n: usize, positive_fraction: f64, d: usize, difficulty: f64, seed: u64) -> Result<Dataset> {
    if n < 20 {
        return Err(Error::Config(format!("synth needs at least 20 rows, got {n}")));
    }
    if !(positive_fraction > 0.0 && positive_fraction < 1.0) {
        return Err(Error::Config("positive_fraction must lie strictly between 0 and 1".into()));
    }
    if d == 0 {
        return Err(Error::Config("synth needs at least one numeric feature".into()));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::Config("difficulty must lie in [0, 1]".into()));
    }
    let n_pos = ((n as f64 * positive_fraction + 0.5).floor() as usize).clamp(1, n - 1);
    let informative = d.div_ceil(2);
    let shift = 8.0 * (1.0 - difficulty);
    let neg_mix = [0.5, 0.3, 0.2];
    let pos_mix: Vec<f64> = [0.1, 0.2, 0.7]
        .iter()
        .zip(&neg_mix)
        .map(|(p, q)| (1.0 - difficulty) * p + difficulty * q)
        .collect();
    let mut r = rng::seeded(seed);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut r);
    let rows: Vec<Vec<Cell>> = labels
        .iter()
        .map(|&y| {
            let mut row: Vec<Cell> = (0..d)
                .map(|j| {
                    let z: f64 = r.sample(StandardNormal);
                    let v = if y == 1 && j < informative { z + shift } else { z };
                    Cell::Num((v * 1e6).round() / 1e6)
                })
                .collect();
            let mix: &[f64] = if y == 1 { &pos_mix } else { &neg_mix };
            let u: f64 = r.random();
            let c = if u < mix[0] {
                0
            } else if u < mix[0] + mix[1] {
                1
            } else {
                2
            };
            row.push(Cell::Cat(c));
            row
        })
        .collect();
    let mut features: Vec<Feature> = (0..d).map(|j| Feature::numeric(format!("x{j}"))).collect();
    features.push(Feature::categorical(SYNTH_CATEGORICAL, SYNTH_CHANNELS).immutable());
    Dataset::new(FeatureSchema::new(features)?, rows, Some(labels))
}

/// Writes `data.csv` and `schema.json` into `dir`.
pub fn write_dataset(data: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    data::save_csv(data, dir.join("data.csv"))?;
    data.schema.save(dir.join("schema.json"))
}
