//! Tabular data handling: schema, CSV ingestion, cleansing, one-hot encoding,
//! min-max normalization and the two split regimes (stratified hold-out and
//! the one-class negatives/positives split).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default fraction of nulls at which a feature is dropped by [`cleanse`].
pub const DEFAULT_NULL_FEATURE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

/// Marks a numeric column that was produced by one-hot encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotSource {
    pub feature: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default = "default_mutable")]
    pub mutable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot: Option<OneHotSource>,
}

fn default_mutable() -> bool {
    true
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
            mutable: true,
            range: None,
            one_hot: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
            mutable: true,
            range: None,
            one_hot: None,
        }
    }

    pub fn with_range(mut self, low: f64, high: f64) -> Self {
        self.range = Some((low, high));
        self
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric)
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            FeatureKind::Categorical { categories } => Some(categories),
            FeatureKind::Numeric => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    /// All-numeric schema with the given column names.
    pub fn numeric<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| Feature::numeric(n.as_ref())).collect())
    }

    /// `X0..X{d-1}` numeric schema.
    pub fn numeric_indexed(d: usize) -> Self {
        FeatureSchema {
            features: (0..d).map(|j| Feature::numeric(format!("X{j}"))).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.is_empty() {
                return Err(Error::Config("feature name must be nonempty".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name {:?}", f.name)));
            }
            if let FeatureKind::Categorical { categories } = &f.kind {
                if categories.is_empty() {
                    return Err(Error::Config(format!(
                        "categorical feature {:?} has no categories",
                        f.name
                    )));
                }
                let distinct: HashSet<_> = categories.iter().collect();
                if distinct.len() != categories.len() {
                    return Err(Error::Config(format!(
                        "categorical feature {:?} lists a category twice",
                        f.name
                    )));
                }
            }
            if let Some((lo, hi)) = f.range {
                if !(lo <= hi) {
                    return Err(Error::Config(format!(
                        "feature {:?} range has low > high",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: FeatureSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// One parsed CSV cell. Categorical values hold the index into the
/// feature's category list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Null,
}

impl Cell {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    fn key(&self) -> (u8, u64) {
        match *self {
            // -0.0 and 0.0 compare equal after parsing
            Cell::Num(v) => (0, if v == 0.0 { 0 } else { v.to_bits() }),
            Cell::Cat(c) => (1, c as u64),
            Cell::Null => (2, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<Cell>>,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<Cell>>, labels: Option<Vec<u8>>) -> Result<Self> {
        let d = schema.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!("row {i} has {} cells, schema has {d}", row.len())));
            }
            for (cell, f) in row.iter().zip(&schema.features) {
                match (cell, &f.kind) {
                    (Cell::Null, _) | (Cell::Num(_), FeatureKind::Numeric) => {}
                    (Cell::Cat(c), FeatureKind::Categorical { categories })
                        if (*c as usize) < categories.len() => {}
                    _ => {
                        return Err(Error::Data(format!(
                            "row {i}: cell does not conform to feature {:?}",
                            f.name
                        )))
                    }
                }
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::Data(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
            if labels.iter().any(|&y| y > 1) {
                return Err(Error::Data("labels must be 0 or 1".into()));
            }
        }
        Ok(Dataset { schema, rows, labels })
    }

    /// Builds a dataset from a dense numeric matrix.
    pub fn from_numeric(schema: FeatureSchema, matrix: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        let rows = matrix
            .into_iter()
            .map(|r| r.into_iter().map(Cell::Num).collect())
            .collect();
        Dataset::new(schema, rows, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data("dataset has no labels".into()))
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> Result<(usize, usize)> {
        let labels = self.labels()?;
        let pos = labels.iter().filter(|&&y| y == 1).count();
        Ok((labels.len() - pos, pos))
    }

    /// Dense numeric view; fails on categorical or null cells.
    pub fn numeric_matrix(&self) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .zip(&self.schema.features)
                    .map(|(c, f)| match c {
                        Cell::Num(v) => Ok(*v),
                        _ => Err(Error::Data(format!(
                            "row {i}: feature {:?} is not a numeric value",
                            f.name
                        ))),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Renders a cell the way it is written to CSV.
    pub fn render_cell(&self, feature: usize, cell: &Cell) -> String {
        match cell {
            Cell::Num(v) => format!("{v}"),
            Cell::Cat(c) => self.schema.features[feature]
                .categories()
                .and_then(|cats| cats.get(*c as usize))
                .cloned()
                .unwrap_or_default(),
            Cell::Null => String::new(),
        }
    }
}

/// Options for reading CSV transaction files.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_column: Option<String>,
    /// Extra token treated as null besides the empty string.
    pub null_token: Option<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, label_column: Option<&str>) -> Result<Dataset> {
    let opts = CsvOptions {
        label_column: label_column.map(str::to_owned),
        null_token: None,
    };
    load_csv_with(path, schema, &opts)
}

pub fn load_csv_with(path: impl AsRef<Path>, schema: &FeatureSchema, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, opts)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, opts: &CsvOptions) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();

    let mut expected: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    if let Some(label) = &opts.label_column {
        expected.push(label);
    }
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    if header.len() != expected.len() || expected.iter().any(|name| !position.contains_key(name)) {
        return Err(Error::HeaderMismatch(format!(
            "expected columns {expected:?}, found {header:?}"
        )));
    }
    let columns: Vec<usize> = schema.features.iter().map(|f| position[f.name.as_str()]).collect();
    let label_col = opts.label_column.as_ref().map(|l| position[l.as_str()]);
    let lookup: Vec<Option<HashMap<&str, u32>>> = schema
        .features
        .iter()
        .map(|f| {
            f.categories().map(|cats| {
                cats.iter()
                    .enumerate()
                    .map(|(i, c)| (c.as_str(), i as u32))
                    .collect()
            })
        })
        .collect();

    let is_null = |s: &str| s.is_empty() || opts.null_token.as_deref() == Some(s);
    let mut rows = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for record in rdr.records() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for (j, &col) in columns.iter().enumerate() {
            let raw = record.get(col).unwrap_or("").trim();
            let cell = if is_null(raw) {
                Cell::Null
            } else {
                match &lookup[j] {
                    None => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map_or(Cell::Null, Cell::Num),
                    Some(map) => match map.get(raw) {
                        Some(&c) => Cell::Cat(c),
                        None => {
                            return Err(Error::UnknownCategory {
                                feature: schema.features[j].name.clone(),
                                token: raw.to_owned(),
                            })
                        }
                    },
                }
            };
            row.push(cell);
        }
        if let (Some(col), Some(labels)) = (label_col, labels.as_mut()) {
            let raw = record.get(col).unwrap_or("").trim();
            let y = match raw {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => {
                    return Err(Error::Data(format!(
                        "label {other:?} on line {} is not 0 or 1",
                        rows.len() + 2
                    )))
                }
            };
            labels.push(y);
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows, labels)
}

/// Header column used for labels when writing CSV.
pub const LABEL_COLUMN: &str = "label";

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = data.schema.names();
    if data.labels.is_some() {
        header.push(LABEL_COLUMN.to_owned());
    }
    wtr.write_record(&header)?;
    for (i, row) in data.rows.iter().enumerate() {
        let mut record: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| data.render_cell(j, c))
            .collect();
        if let Some(labels) = &data.labels {
            record.push(labels[i].to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// Removes exact duplicate rows (first occurrence kept), drops features whose
/// null fraction reaches `null_feature_threshold`, then drops every row that
/// still holds a null. No imputation is performed. Duplicates are compared
/// together with the label.
pub fn cleanse(data: &Dataset, null_feature_threshold: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&null_feature_threshold) {
        return Err(Error::Config("null_feature_threshold must lie in [0, 1]".into()));
    }
    let mut seen = HashSet::new();
    let mut keep = Vec::new();
    for (i, row) in data.rows.iter().enumerate() {
        let mut key: Vec<(u8, u64)> = row.iter().map(Cell::key).collect();
        if let Some(labels) = &data.labels {
            key.push((3, labels[i] as u64));
        }
        if seen.insert(key) {
            keep.push(i);
        }
    }

    let n = keep.len();
    let d = data.n_features();
    let kept_features: Vec<usize> = (0..d)
        .filter(|&j| {
            if n == 0 {
                return true;
            }
            let nulls = keep.iter().filter(|&&i| data.rows[i][j].is_null()).count();
            (nulls as f64 / n as f64) < null_feature_threshold
        })
        .collect();

    let schema = FeatureSchema {
        features: kept_features.iter().map(|&j| data.schema.features[j].clone()).collect(),
    };
    let mut rows = Vec::new();
    let mut labels = data.labels.as_ref().map(|_| Vec::new());
    // dropping features can turn distinct rows into duplicates
    seen.clear();
    for &i in &keep {
        let row: Vec<Cell> = kept_features.iter().map(|&j| data.rows[i][j]).collect();
        if row.iter().any(Cell::is_null) {
            continue;
        }
        let mut key: Vec<(u8, u64)> = row.iter().map(Cell::key).collect();
        if let Some(labels) = &data.labels {
            key.push((3, labels[i] as u64));
        }
        if !seen.insert(key) {
            continue;
        }
        rows.push(row);
        if let (Some(out), Some(src)) = (labels.as_mut(), data.labels.as_ref()) {
            out.push(src[i]);
        }
    }
    if schema.is_empty() {
        return Err(Error::Data("cleansing removed every feature".into()));
    }
    if rows.is_empty() {
        return Err(Error::Data("cleansing removed every row".into()));
    }
    Ok(Dataset { schema, rows, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub feature: String,
    pub categories: Vec<String>,
    /// First encoded column of the group; the group spans `categories.len()` columns.
    pub start: usize,
}

/// Mapping between a source schema with categoricals and its one-hot encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotMap {
    pub source: FeatureSchema,
    pub encoded: FeatureSchema,
    pub groups: Vec<OneHotGroup>,
    /// For every source feature, the first encoded column it maps to.
    pub offsets: Vec<usize>,
}

impl OneHotMap {
    pub fn new(source: &FeatureSchema) -> Self {
        let mut features = Vec::new();
        let mut groups = Vec::new();
        let mut offsets = Vec::new();
        for f in &source.features {
            offsets.push(features.len());
            match &f.kind {
                FeatureKind::Numeric => features.push(f.clone()),
                FeatureKind::Categorical { categories } => {
                    groups.push(OneHotGroup {
                        feature: f.name.clone(),
                        categories: categories.clone(),
                        start: features.len(),
                    });
                    for c in categories {
                        features.push(Feature {
                            name: format!("{}={}", f.name, c),
                            kind: FeatureKind::Numeric,
                            mutable: f.mutable,
                            range: Some((0.0, 1.0)),
                            one_hot: Some(OneHotSource {
                                feature: f.name.clone(),
                                category: c.clone(),
                            }),
                        });
                    }
                }
            }
        }
        OneHotMap {
            source: source.clone(),
            encoded: FeatureSchema { features },
            groups,
            offsets,
        }
    }

    pub fn encode_row(&self, row: &[Cell]) -> Result<Vec<f64>> {
        if row.len() != self.source.len() {
            return Err(Error::DimensionMismatch {
                expected: self.source.len(),
                got: row.len(),
            });
        }
        let mut out = vec![0.0; self.encoded.len()];
        for (j, (cell, f)) in row.iter().zip(&self.source.features).enumerate() {
            let at = self.offsets[j];
            match (cell, &f.kind) {
                (Cell::Num(v), FeatureKind::Numeric) => out[at] = *v,
                (Cell::Cat(c), FeatureKind::Categorical { categories }) if (*c as usize) < categories.len() => {
                    out[at + *c as usize] = 1.0
                }
                (Cell::Null, _) => {
                    return Err(Error::Precondition(format!(
                        "null in feature {:?}; cleanse before encoding",
                        f.name
                    )))
                }
                _ => return Err(Error::Data(format!("cell does not conform to feature {:?}", f.name))),
            }
        }
        Ok(out)
    }

    /// Inverse of [`encode_row`](Self::encode_row); the active category of a
    /// group is its largest column (lowest index on ties).
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<Cell>> {
        if encoded.len() != self.encoded.len() {
            return Err(Error::DimensionMismatch {
                expected: self.encoded.len(),
                got: encoded.len(),
            });
        }
        Ok(self
            .source
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let at = self.offsets[j];
                match &f.kind {
                    FeatureKind::Numeric => Cell::Num(encoded[at]),
                    FeatureKind::Categorical { categories } => {
                        Cell::Cat(argmax(&encoded[at..at + categories.len()]) as u32)
                    }
                }
            })
            .collect())
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-hot encodes every categorical feature. Numeric features pass through.
pub fn encode_one_hot(data: &Dataset) -> Result<(Dataset, OneHotMap)> {
    let map = OneHotMap::new(&data.schema);
    let matrix = data
        .rows
        .iter()
        .map(|r| map.encode_row(r))
        .collect::<Result<Vec<_>>>()?;
    let encoded = Dataset::from_numeric(map.encoded.clone(), matrix, data.labels.clone())?;
    Ok((encoded, map))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

/// Min-max parameters for every numeric feature, observed on a fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    /// Indexed like the schema; `None` for categorical features.
    pub columns: Vec<Option<NormEntry>>,
}

impl NormParams {
    fn check(&self, schema: &FeatureSchema) -> Result<()> {
        if self.columns.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: schema.len(),
            });
        }
        for (entry, f) in self.columns.iter().zip(&schema.features) {
            if entry.is_some() != f.is_numeric() {
                return Err(Error::Data(format!(
                    "normalization parameters do not fit feature {:?}",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn scale(&self, column: usize, v: f64) -> f64 {
        match &self.columns[column] {
            Some(e) if e.max > e.min => (v - e.min) / (e.max - e.min),
            Some(_) => 0.0,
            None => v,
        }
    }

    pub fn unscale(&self, column: usize, v: f64) -> f64 {
        match &self.columns[column] {
            Some(e) => v * (e.max - e.min) + e.min,
            None => v,
        }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = self.scale(j, *v);
        }
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = self.unscale(j, *v);
        }
    }
}

pub fn fit_normalize(data: &Dataset) -> Result<NormParams> {
    let columns = data
        .schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            if !f.is_numeric() {
                return None;
            }
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for row in &data.rows {
                if let Cell::Num(v) = row[j] {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
            if min > max {
                // all-null column
                min = 0.0;
                max = 0.0;
            }
            Some(NormEntry {
                feature: f.name.clone(),
                min,
                max,
            })
        })
        .collect();
    Ok(NormParams { columns })
}

fn map_numeric(data: &Dataset, params: &NormParams, f: impl Fn(usize, f64) -> f64) -> Result<Dataset> {
    params.check(&data.schema)?;
    let rows = data
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, c)| match c {
                    Cell::Num(v) => Cell::Num(f(j, *v)),
                    other => *other,
                })
                .collect()
        })
        .collect();
    let mut schema = data.schema.clone();
    for (j, feat) in schema.features.iter_mut().enumerate() {
        if let Some((lo, hi)) = feat.range {
            let (a, b) = (f(j, lo), f(j, hi));
            feat.range = Some((a.min(b), a.max(b)));
        }
    }
    Ok(Dataset {
        schema,
        rows,
        labels: data.labels.clone(),
    })
}

/// Min-max scales numeric features to [0, 1]; constant features map to 0.
/// Schema ranges are carried through the same transform.
pub fn apply_normalize(data: &Dataset, params: &NormParams) -> Result<Dataset> {
    map_numeric(data, params, |j, v| params.scale(j, v))
}

pub fn invert_normalize(data: &Dataset, params: &NormParams) -> Result<Dataset> {
    map_numeric(data, params, |j, v| params.unscale(j, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    /// Source row indices of each side, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Per-class stratified hold-out: each class contributes
/// `round_half_up(count * train_fraction)` rows to train, the rest to test.
/// Both sides keep the source row order.
pub fn stratified_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config("train_fraction must lie in [0, 1]".into()));
    }
    let labels = data.labels()?;
    let mut rng = rng::seeded(seed);
    let mut in_train = vec![false; labels.len()];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::Precondition(format!(
                "class {class} has {} rows; stratified split needs at least 2",
                members.len()
            )));
        }
        let take = round_half_up(members.len() as f64 * train_fraction).min(members.len());
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_train[i] = true;
        }
    }
    let train_indices: Vec<usize> = (0..labels.len()).filter(|&i| in_train[i]).collect();
    let test_indices: Vec<usize> = (0..labels.len()).filter(|&i| !in_train[i]).collect();
    Ok(SplitPair {
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        seed,
        train_indices,
        test_indices,
    })
}

/// Train on all negatives, test on all positives.
pub fn occ_split(data: &Dataset) -> Result<SplitPair> {
    let labels = data.labels()?;
    let train_indices: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let test_indices: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    if train_indices.is_empty() {
        return Err(Error::Precondition("no negative rows to train on".into()));
    }
    if test_indices.is_empty() {
        return Err(Error::Precondition("no positive rows to test on".into()));
    }
    Ok(SplitPair {
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        seed: 0,
        train_indices,
        test_indices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Persists `train.csv`, `test.csv` and `split.json` into `dir`.
pub fn save_split(split: &SplitPair, train_fraction: f64, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_csv(&split.train, dir.join("train.csv"))?;
    save_csv(&split.test, dir.join("test.csv"))?;
    let manifest = SplitManifest {
        seed: split.seed,
        train_fraction,
        train_rows: split.train.n_rows(),
        test_rows: split.test.n_rows(),
    };
    let path = dir.join("split.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))
}
