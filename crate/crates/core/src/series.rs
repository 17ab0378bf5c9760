//! Time-series container, CSV ingestion, normalization and windowing into
//! supervised samples.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate real-valued series. At least two points, all finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    name: String,
    freq_hint: Option<String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_name(values, "value")
    }

    pub fn with_name(values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 points, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "value at index {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self {
            values,
            name: name.into(),
            freq_hint: None,
        })
    }

    pub fn with_freq_hint(mut self, hint: impl Into<String>) -> Self {
        self.freq_hint = Some(hint.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn freq_hint(&self) -> Option<&str> {
        self.freq_hint.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Which CSV column holds the series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => write!(f, "{n:?}"),
        }
    }
}

impl From<&str> for Column {
    /// Bare integers select by index, anything else by header name.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        }
    }
}

/// Loads one column of a comma-separated file.
///
/// Row numbers in errors are 1-based physical lines, header included. When the
/// column is selected by name the first row must be a header. When selected by
/// index, a first row whose cell does not parse as a number is taken as a
/// header; every later row must parse.
pub fn load_csv(path: impl AsRef<Path>, column: &Column) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, column)
}

/// Reader-based variant of [`load_csv`].
pub fn read_csv<R: Read>(reader: R, column: &Column) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut col_idx: Option<usize> = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut name = String::from("value");

    for (i, record) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let idx = match col_idx {
            Some(idx) => idx,
            None => {
                let Column::Name(wanted) = column else { unreachable!() };
                let idx = record
                    .iter()
                    .position(|h| h == wanted)
                    .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
                name = wanted.clone();
                col_idx = Some(idx);
                continue;
            }
        };
        let cell = record
            .get(idx)
            .ok_or_else(|| Error::MissingColumn(format!("{column} (row {row})")))?;
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::NonNumeric {
                    row,
                    cell: cell.to_string(),
                })
            }
            Err(_) if row == 1 && matches!(column, Column::Index(_)) => name = cell.to_string(),
            Err(_) => {
                return Err(Error::NonNumeric {
                    row,
                    cell: cell.to_string(),
                })
            }
        }
    }
    if col_idx.is_none() {
        return Err(Error::MissingColumn(column.to_string()));
    }
    TimeSeries::with_name(values, name)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Zscore,
    Minmax,
    None,
}

impl NormKind {
    fn label(self) -> &'static str {
        match self {
            NormKind::Zscore => "zscore",
            NormKind::Minmax => "minmax",
            NormKind::None => "none",
        }
    }
}

/// Affine normalization fit on the training portion of a series.
///
/// `zscore` uses the population standard deviation; `minmax` maps the
/// training range onto [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalizer {
    Zscore { mean: f64, std: f64 },
    Minmax { min: f64, max: f64 },
    None,
}

impl Normalizer {
    pub fn kind(&self) -> NormKind {
        match self {
            Normalizer::Zscore { .. } => NormKind::Zscore,
            Normalizer::Minmax { .. } => NormKind::Minmax,
            Normalizer::None => NormKind::None,
        }
    }

    /// (offset, scale) such that `normalized = (x - offset) / scale`.
    fn affine(&self) -> (f64, f64) {
        match *self {
            Normalizer::Zscore { mean, std } => (mean, std),
            Normalizer::Minmax { min, max } => (min, max - min),
            Normalizer::None => (0.0, 1.0),
        }
    }

    pub fn normalize_value(&self, x: f64) -> f64 {
        let (offset, scale) = self.affine();
        (x - offset) / scale
    }

    pub fn denormalize_value(&self, y: f64) -> f64 {
        let (offset, scale) = self.affine();
        y * scale + offset
    }

    pub fn normalize(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.normalize_value(x)).collect()
    }

    pub fn denormalize(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.denormalize_value(y)).collect()
    }

    pub fn apply(&self, series: &TimeSeries) -> Result<TimeSeries> {
        let mut out = TimeSeries::with_name(self.normalize(series.values()), series.name())?;
        out.freq_hint = series.freq_hint.clone();
        Ok(out)
    }
}

/// Fits a normalizer on the first `⌊train_fraction·len⌋` points.
pub fn fit_normalizer(series: &TimeSeries, train_fraction: f64, kind: NormKind) -> Result<Normalizer> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "train_fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * series.len() as f64).floor() as usize;
    if n_train < 2 {
        return Err(Error::SeriesTooShort {
            len: n_train,
            needed: 2,
        });
    }
    let train = &series.values()[..n_train];
    match kind {
        NormKind::None => Ok(Normalizer::None),
        NormKind::Zscore => {
            let n = train.len() as f64;
            let mean = train.iter().sum::<f64>() / n;
            let var = train.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= 0.0 || !std.is_finite() {
                return Err(Error::DegenerateScale {
                    kind: kind.label(),
                    reason: "training values have zero variance".into(),
                });
            }
            Ok(Normalizer::Zscore { mean, std })
        }
        NormKind::Minmax => {
            let min = train.iter().copied().fold(f64::INFINITY, f64::min);
            let max = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max <= min {
                return Err(Error::DegenerateScale {
                    kind: kind.label(),
                    reason: format!("min equals max ({min})"),
                });
            }
            Ok(Normalizer::Minmax { min, max })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Chronological train/val/test fractions; must sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let s = Self { train, val, test };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidSplit(format!(
                "{parts:?} contains a negative or non-finite part"
            )));
        }
        if ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("{parts:?} does not sum to 1")));
        }
        Ok(())
    }
}

/// One supervised sample. `anchor` is the last input value, the observation
/// immediately preceding the first target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub start: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub anchor: f64,
    pub split: Split,
}

/// Stride-1 sliding windows with chronological split tags.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    samples: Vec<Sample>,
    input_len: usize,
    horizon: usize,
}

/// Cuts `series` into `len - T - h + 1` windows. Sample `i` reads input
/// `x[i..i+T]`, target `x[i+T..i+T+h]`. The first `⌊train·N⌋` samples (by
/// start index) are train, the next `⌊val·N⌋` are validation, the rest test.
pub fn make_windows(
    series: &TimeSeries,
    input_len: usize,
    horizon: usize,
    splits: SplitFractions,
) -> Result<WindowedDataset> {
    if input_len == 0 || horizon == 0 {
        return Err(Error::InvalidSpec(format!(
            "input length and horizon must be positive (got T={input_len}, h={horizon})"
        )));
    }
    splits.validate()?;
    let xs = series.values();
    let needed = input_len + horizon;
    if xs.len() < needed {
        return Err(Error::SeriesTooShort { len: xs.len(), needed });
    }
    let count = xs.len() - needed + 1;
    let n_train = (splits.train * count as f64).floor() as usize;
    let n_val = ((splits.val * count as f64).floor() as usize).min(count - n_train);

    let samples = (0..count)
        .map(|i| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            Sample {
                start: i,
                input: xs[i..i + input_len].to_vec(),
                target: xs[i + input_len..i + needed].to_vec(),
                anchor: xs[i + input_len - 1],
                split,
            }
        })
        .collect();
    Ok(WindowedDataset {
        samples,
        input_len,
        horizon,
    })
}

impl WindowedDataset {
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }

    /// Copy of the dataset with every sample of `split` removed.
    pub fn without(&self, split: Split) -> Self {
        Self {
            samples: self.samples.iter().filter(|s| s.split != split).cloned().collect(),
            input_len: self.input_len,
            horizon: self.horizon,
        }
    }
}
