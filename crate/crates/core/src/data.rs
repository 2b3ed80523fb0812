//! Datasets, CSV ingestion, synthetic generators and stratified splitting.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Feature matrix with dense integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    feature_ranges: Vec<(f64, f64)>,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyData("a dataset needs at least one sample".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let n = feature_names.len();
        if n == 0 {
            return Err(Error::shape("a dataset needs at least one feature"));
        }
        if let Some(r) = features.iter().position(|row| row.len() != n) {
            return Err(Error::shape(format!(
                "row {r} has {} values, expected {n}",
                features[r].len()
            )));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        let c = class_names.len();
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::invalid(format!("label {bad} out of range for {c} classes")));
        }
        let feature_ranges = (0..n)
            .map(|f| {
                features.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                    (lo.min(row[f]), hi.max(row[f]))
                })
            })
            .collect();
        let mut class_counts = vec![0; c];
        for &y in &labels {
            class_counts[y] += 1;
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
            feature_ranges,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Per-feature `(min, max)` over the samples.
    pub fn feature_ranges(&self) -> &[(f64, f64)] {
        &self.feature_ranges
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Samples at `indices`, keeping the class vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }
}

fn default_feature_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn binary_class_names() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// Two-feature synthetic problems over `(-1, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// `x1 > x2`
    Bisector,
    /// Opposite quadrants share a label: class 1 iff `(x1 > 0) xor (x2 > 0)`.
    Xor,
    /// The literal conjunction `x1 > 0 and x2 > 0`, kept for comparison with [`SyntheticKind::Xor`].
    XorLiteral,
    /// `x2 < 2 x1^2 - 1/2`
    Parabola,
    /// `x1^2 + x2^2 < 1/2`
    Circle,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 5] = [
        SyntheticKind::Bisector,
        SyntheticKind::Xor,
        SyntheticKind::XorLiteral,
        SyntheticKind::Parabola,
        SyntheticKind::Circle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Bisector => "bisector",
            SyntheticKind::Xor => "xor",
            SyntheticKind::XorLiteral => "xor-literal",
            SyntheticKind::Parabola => "parabola",
            SyntheticKind::Circle => "circle",
        }
    }

    /// Class of a point.
    pub fn label(&self, x1: f64, x2: f64) -> usize {
        let positive = match self {
            SyntheticKind::Bisector => x1 > x2,
            SyntheticKind::Xor => (x1 > 0.0) ^ (x2 > 0.0),
            SyntheticKind::XorLiteral => x1 > 0.0 && x2 > 0.0,
            SyntheticKind::Parabola => x2 < 2.0 * x1 * x1 - 0.5,
            SyntheticKind::Circle => x1 * x1 + x2 * x2 < 0.5,
        };
        usize::from(positive)
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic dataset `{s}`")))
    }
}

/// Draws from the open interval `(-1, 1)`.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.gen_range(-1.0..1.0);
        if v > -1.0 {
            return v;
        }
    }
}

pub fn generate_synthetic(kind: SyntheticKind, n_samples: usize, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut rng = seeded(seed);
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x1 = open_unit(&mut rng);
        let x2 = open_unit(&mut rng);
        labels.push(kind.label(x1, x2));
        features.push(vec![x1, x2]);
    }
    Dataset::new(features, labels, default_feature_names(2), binary_class_names())
}

/// Attribute domains for the MONK-2 problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonksVariant {
    /// Every attribute ranges over `{1, 2, 3, 4}`.
    Uniform4,
    /// The UCI cardinalities `(3, 3, 2, 3, 4, 2)`.
    Official,
}

impl MonksVariant {
    pub fn cardinalities(&self) -> [usize; 6] {
        match self {
            MonksVariant::Uniform4 => [4; 6],
            MonksVariant::Official => [3, 3, 2, 3, 4, 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every point of the domain once, in lexicographic order.
    Full,
    /// `n` points drawn uniformly with replacement.
    Random(usize),
}

/// MONK-2 label: exactly two attributes equal 1.
pub fn monks2_label(x: &[f64]) -> usize {
    usize::from(x.iter().filter(|&&v| v == 1.0).count() == 2)
}

pub fn generate_monks2(variant: MonksVariant, sampling: Sampling, seed: u64) -> Result<Dataset> {
    let card = variant.cardinalities();
    let features: Vec<Vec<f64>> = match sampling {
        Sampling::Full => {
            let total: usize = card.iter().product();
            (0..total)
                .map(|mut code| {
                    let mut row = vec![0.0; 6];
                    for a in (0..6).rev() {
                        row[a] = (code % card[a] + 1) as f64;
                        code /= card[a];
                    }
                    row
                })
                .collect()
        }
        Sampling::Random(0) => return Err(Error::invalid("n_samples must be at least 1")),
        Sampling::Random(n) => {
            let mut rng = seeded(seed);
            (0..n)
                .map(|_| card.iter().map(|&c| rng.gen_range(1..=c) as f64).collect())
                .collect()
        }
    };
    let labels = features.iter().map(|x| monks2_label(x)).collect();
    Dataset::new(features, labels, default_feature_names(6), binary_class_names())
}

/// Reads a CSV with a header row and the label in the last column.
///
/// When every label parses as an integer, classes are ordered numerically;
/// otherwise they are numbered in order of first appearance.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |row: usize, column: usize, message: String| Error::Csv { row, column, message };
    let header = rdr.headers().map_err(|e| csv_err(1, 1, e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(csv_err(1, 1, "expected at least one feature column and a label column".into()));
    }
    let n = header.len() - 1;
    let feature_names: Vec<String> = header.iter().take(n).map(str::to_owned).collect();

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| csv_err(row, 1, e.to_string()))?;
        if record.len() != header.len() {
            return Err(csv_err(
                row,
                record.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .take(n)
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_err(row, c + 1, format!("cannot parse `{cell}` as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        features.push(values);
        raw_labels.push(record[n].to_owned());
    }
    if features.is_empty() {
        return Err(Error::EmptyData("csv has no data rows".into()));
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for label in &raw_labels {
        if !index.contains_key(label) {
            index.insert(label.clone(), class_names.len());
            class_names.push(label.clone());
        }
    }
    let numeric: Option<Vec<i64>> = class_names.iter().map(|s| s.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut order: Vec<usize> = (0..class_names.len()).collect();
        order.sort_by_key(|&i| values[i]);
        class_names = order.iter().map(|&i| class_names[i].clone()).collect();
        index = class_names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    }
    let labels = raw_labels.iter().map(|l| index[l]).collect();
    Dataset::new(features, labels, feature_names, class_names)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file))
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push("class");
    w.write_record(&header).map_err(io)?;
    for (row, &y) in data.features.iter().zip(&data.labels) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(data.class_names[y].clone());
        w.write_record(&cells).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Seeded stratified split.
///
/// Each class contributes `round(train_fraction * count)` samples to the
/// training side, clamped so that both sides get at least one sample when
/// the class has two or more.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train_fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut rng = seeded(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    let mut warnings = Vec::new();
    for class in 0..data.n_classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let count = members.len();
        let n_train = if count == 1 {
            warnings.push(format!(
                "class `{}` has a single sample; it was placed in the training split",
                data.class_names[class]
            ));
            1
        } else {
            ((train_fraction * count as f64).round() as usize).clamp(1, count - 1)
        };
        train_indices.extend_from_slice(&members[..n_train]);
        test_indices.extend_from_slice(&members[n_train..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    if test_indices.is_empty() {
        return Err(Error::EmptyData("the test split would be empty".into()));
    }
    Ok(Split {
        train: data.subset(&train_indices)?,
        test: data.subset(&test_indices)?,
        train_indices,
        test_indices,
        warnings,
    })
}

/// Class weights inversely proportional to class frequency, `N / (C * n_c)`.
pub fn class_weights(data: &Dataset) -> Result<Vec<f64>> {
    let n = data.len() as f64;
    let c = data.n_classes() as f64;
    data.class_counts
        .iter()
        .enumerate()
        .map(|(k, &count)| {
            if count == 0 {
                Err(Error::EmptyData(format!("class `{}` has no samples", data.class_names[k])))
            } else {
                Ok(n / (c * count as f64))
            }
        })
        .collect()
}
