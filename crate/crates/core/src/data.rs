//! Datasets, CSV I/O, z-score normalization and the synthetic benchmark
//! generators.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::distr::Uniform;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Number of feature columns emitted by every synthetic generator.
pub const SYNTH_FEATURES: usize = 22;

/// Largest number of distinct integer label values still read as classes.
pub const MAX_INFERRED_CLASSES: usize = 20;

/// Half-width of the uniform input box for [`synth_regression`].
pub const REGRESSION_HALF_WIDTH: f64 = 2.0;

/// Standard deviation of the additive label noise in [`synth_regression`].
pub const REGRESSION_NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Binary,
    Multiclass,
    Real,
}

/// Supervision targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Values are -1 or +1.
    Binary(Vec<i8>),
    /// Class ids `0..c`.
    Multiclass(Vec<usize>),
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary(v) => v.len(),
            Labels::Multiclass(v) => v.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> LabelKind {
        match self {
            Labels::Binary(_) => LabelKind::Binary,
            Labels::Multiclass(_) => LabelKind::Multiclass,
            Labels::Real(_) => LabelKind::Real,
        }
    }

    /// Labels as numbers: +-1, class ids, or the raw reals.
    pub fn to_numeric(&self) -> Vec<f64> {
        match self {
            Labels::Binary(v) => v.iter().map(|&y| f64::from(y)).collect(),
            Labels::Multiclass(v) => v.iter().map(|&c| c as f64).collect(),
            Labels::Real(v) => v.clone(),
        }
    }

    /// Labels reordered so that entry `i` is the old entry `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Labels {
        match self {
            Labels::Binary(v) => Labels::Binary(perm.iter().map(|&i| v[i]).collect()),
            Labels::Multiclass(v) => Labels::Multiclass(perm.iter().map(|&i| v[i]).collect()),
            Labels::Real(v) => Labels::Real(perm.iter().map(|&i| v[i]).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Labels::Binary(v) => {
                if let Some(bad) = v.iter().find(|&&y| y != 1 && y != -1) {
                    return Err(Error::InvalidParameter(format!(
                        "binary label {bad} is not +1 or -1"
                    )));
                }
            }
            Labels::Multiclass(_) => {}
            Labels::Real(v) => {
                if v.iter().any(|y| !y.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite label".into()));
                }
            }
        }
        Ok(())
    }
}

/// A supervised sample: `m` rows of `d` features plus one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Labels,
    feature_names: Vec<String>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Labels,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (m, d) = features.dim();
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        if labels.len() != m {
            return Err(Error::Shape(format!(
                "{} labels for {m} feature rows",
                labels.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::Shape(format!(
                "{} feature names for {d} columns",
                feature_names.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        labels.validate()?;
        Ok(Self {
            features,
            labels,
            feature_names,
            provenance: provenance.into(),
        })
    }

    /// Dataset with generated names `f0, f1, ...`.
    pub fn with_default_names(
        features: Array2<f64>,
        labels: Labels,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        Self::new(features, labels, names, provenance)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Reads a CSV file. `label_kind` overrides label-type inference.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    label_kind: Option<LabelKind>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut ds = read_csv(file, label_column, label_kind)?;
    ds.provenance = path.display().to_string();
    Ok(ds)
}

/// Parses CSV from a reader: header row first, comma separated, `.` decimal
/// point. Every non-label cell must be numeric.
pub fn read_csv<R: Read>(
    reader: R,
    label_column: &str,
    label_kind: Option<LabelKind>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let d = feature_names.len();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = row + 2;
        for (i, cell) in record.iter().enumerate() {
            let parsed: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                line,
                column: headers.get(i).unwrap_or("?").to_string(),
                value: cell.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(Error::NonNumeric {
                    line,
                    column: headers.get(i).unwrap_or("?").to_string(),
                    value: cell.to_string(),
                });
            }
            if i == label_idx {
                raw_labels.push(parsed);
            } else {
                values.push(parsed);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = raw_labels.len();
    let features = Array2::from_shape_vec((m, d), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let labels = type_labels(&raw_labels, label_kind)?;
    Dataset::new(features, labels, feature_names, "csv")
}

/// Applies the label typing rules to raw numeric labels.
///
/// Without an override: one distinct value is kept as `Real` (a constant
/// target), two distinct values become `Binary` (lower value -> -1), up to
/// [`MAX_INFERRED_CLASSES`] distinct integers become `Multiclass` with ids
/// assigned in ascending value order, anything else is `Real`.
pub fn type_labels(raw: &[f64], kind: Option<LabelKind>) -> Result<Labels> {
    let distinct: Vec<f64> = raw
        .iter()
        .map(|&v| OrdF64(v))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|o| o.0)
        .collect();
    let all_integer = raw.iter().all(|v| v.fract() == 0.0);
    let kind = kind.unwrap_or(match distinct.len() {
        1 => LabelKind::Real,
        2 => LabelKind::Binary,
        n if n <= MAX_INFERRED_CLASSES && all_integer => LabelKind::Multiclass,
        _ => LabelKind::Real,
    });
    let class_of = |v: f64| {
        distinct
            .binary_search_by(|p| p.total_cmp(&v))
            .expect("value drawn from the same slice")
    };
    match kind {
        LabelKind::Binary => {
            if distinct.len() != 2 {
                return Err(Error::DegenerateLabels(format!(
                    "binary labels need exactly 2 distinct values, found {}",
                    distinct.len()
                )));
            }
            Ok(Labels::Binary(
                raw.iter()
                    .map(|&v| if class_of(v) == 0 { -1 } else { 1 })
                    .collect(),
            ))
        }
        LabelKind::Multiclass => Ok(Labels::Multiclass(raw.iter().map(|&v| class_of(v)).collect())),
        LabelKind::Real => Ok(Labels::Real(raw.to_vec())),
    }
}

#[derive(Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Writes the dataset as CSV with the label in a trailing column.
pub fn write_csv<W: Write>(data: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    let labels = data.labels.to_numeric();
    let mut record = Vec::with_capacity(data.n_features() + 1);
    for (row, y) in data.features.outer_iter().zip(labels) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(y.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let file = File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file), label_column)
}

/// Scales every feature column to zero mean and unit population standard
/// deviation. Constant columns become all zeros.
pub fn zscore_normalize(data: &Dataset) -> Result<Dataset> {
    let m = data.n_samples();
    if m < 2 {
        return Err(Error::SampleSize {
            required: 2,
            actual: m,
        });
    }
    let mut features = data.features.clone();
    for mut col in features.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / m as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|x| (x - mean) / std);
        }
    }
    Ok(Dataset {
        features,
        labels: data.labels.clone(),
        feature_names: data.feature_names.clone(),
        provenance: data.provenance.clone(),
    })
}

/// Which synthetic generator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Xor,
    Multiclass,
    Regression,
}

impl SynthKind {
    pub fn generate(self, m: usize, seed: u64) -> Result<Dataset> {
        match self {
            SynthKind::Xor => synth_xor(m, seed),
            SynthKind::Multiclass => synth_multiclass(m, seed),
            SynthKind::Regression => synth_regression(m, seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Xor => "xor",
            SynthKind::Multiclass => "multiclass",
            SynthKind::Regression => "regression",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" => Ok(SynthKind::Xor),
            "multiclass" => Ok(SynthKind::Multiclass),
            "regression" => Ok(SynthKind::Regression),
            other => Err(Error::InvalidParameter(format!("unknown dataset `{other}`"))),
        }
    }
}

fn require_samples(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(Error::SampleSize {
            required: min,
            actual: m,
        });
    }
    Ok(())
}

/// Fills columns `2..` with standard-normal noise from the noise stream.
fn fill_noise(features: &mut Array2<f64>, seed: u64) {
    let mut rng = rng::stream(seed, rng::STREAM_NOISE);
    for j in 2..features.ncols() {
        for i in 0..features.nrows() {
            features[[i, j]] = StandardNormal.sample(&mut rng);
        }
    }
}

/// Reorders rows with the auxiliary stream.
fn shuffle_rows(features: &mut Array2<f64>, labels: &mut Labels, rng: &mut impl Rng) {
    let m = features.nrows();
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    *features = features.select(Axis(0), &perm);
    *labels = labels.permuted(&perm);
}

/// Binary XOR data: four unit-variance Gaussian clusters centered at
/// `(+-2, +-2)` in features 0-1, label +1 when the center's coordinates
/// share a sign. Features 2-21 are standard-normal noise.
pub fn synth_xor(m: usize, seed: u64) -> Result<Dataset> {
    require_samples(m, 8)?;
    if m % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "xor generator needs an even sample count, got {m}"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIGNAL);
    let mut features = Array2::zeros((m, SYNTH_FEATURES));
    let mut labels = Vec::with_capacity(m);
    let half = m / 2;
    // Each class is split as evenly as possible over its two clusters.
    let centers_pos = [(2.0, 2.0), (-2.0, -2.0)];
    let centers_neg = [(2.0, -2.0), (-2.0, 2.0)];
    for i in 0..m {
        let (label, centers, k) = if i < half {
            (1i8, &centers_pos, i)
        } else {
            (-1i8, &centers_neg, i - half)
        };
        let (cx, cy) = centers[k % 2];
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        features[[i, 0]] = cx + nx;
        features[[i, 1]] = cy + ny;
        labels.push(label);
    }
    fill_noise(&mut features, seed);
    let mut labels = Labels::Binary(labels);
    shuffle_rows(&mut features, &mut labels, &mut rng::stream(seed, rng::STREAM_AUX));
    Dataset::with_default_names(features, labels, format!("synth:xor:m={m}:seed={seed}"))
}

/// Class means of [`synth_multiclass`] in features 0-1; the first three lie
/// on the x-axis.
pub const MULTICLASS_MEANS: [(f64, f64); 4] = [(-4.0, 0.0), (0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];

/// Four equally sized unit-variance Gaussian classes with means
/// [`MULTICLASS_MEANS`], plus 20 noise columns.
pub fn synth_multiclass(m: usize, seed: u64) -> Result<Dataset> {
    require_samples(m, 8)?;
    if m % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "multiclass generator needs a sample count divisible by 4, got {m}"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIGNAL);
    let mut features = Array2::zeros((m, SYNTH_FEATURES));
    let per_class = m / 4;
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let class = i / per_class;
        let (mx, my) = MULTICLASS_MEANS[class];
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        features[[i, 0]] = mx + nx;
        features[[i, 1]] = my + ny;
        labels.push(class);
    }
    fill_noise(&mut features, seed);
    let mut labels = Labels::Multiclass(labels);
    shuffle_rows(&mut features, &mut labels, &mut rng::stream(seed, rng::STREAM_AUX));
    Dataset::with_default_names(
        features,
        labels,
        format!("synth:multiclass:m={m}:seed={seed}"),
    )
}

/// Noise-free regression target `x1 * exp(-x1^2 - x2^2)`.
pub fn regression_signal(x1: f64, x2: f64) -> f64 {
    x1 * (-x1 * x1 - x2 * x2).exp()
}

/// Nonlinear regression data: features 0-1 uniform on
/// `[-REGRESSION_HALF_WIDTH, REGRESSION_HALF_WIDTH]^2`, target
/// [`regression_signal`] plus Gaussian noise of standard deviation
/// [`REGRESSION_NOISE_STD`], 20 noise columns.
pub fn synth_regression(m: usize, seed: u64) -> Result<Dataset> {
    require_samples(m, 8)?;
    let mut rng = rng::stream(seed, rng::STREAM_SIGNAL);
    let uniform = Uniform::new_inclusive(-REGRESSION_HALF_WIDTH, REGRESSION_HALF_WIDTH)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noise = Normal::new(0.0, REGRESSION_NOISE_STD)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut aux = rng::stream(seed, rng::STREAM_AUX);
    let mut features = Array2::zeros((m, SYNTH_FEATURES));
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let x1 = uniform.sample(&mut rng);
        let x2 = uniform.sample(&mut rng);
        features[[i, 0]] = x1;
        features[[i, 1]] = x2;
        labels.push(regression_signal(x1, x2) + noise.sample(&mut aux));
    }
    fill_noise(&mut features, seed);
    Dataset::with_default_names(
        features,
        Labels::Real(labels),
        format!("synth:regression:m={m}:seed={seed}"),
    )
}
