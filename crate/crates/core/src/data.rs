//! Dataset ingestion, feature normalization, Euclidean distance and the
//! labeled / unlabeled / test bookkeeping of a sample pool.
//!
//! Labels live on [`Dataset`] only. Clustering and query selection work on
//! [`Features`], a label-free view, so nothing upstream of the oracle can
//! read ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into [`Dataset::class_names`]. Class ids are assigned in sorted
/// label order, so a smaller id is also the lexicographically smaller label.
pub type ClassId = usize;

/// Row-major feature matrix together with the sample id of every row.
///
/// Rows are kept in ascending id order wherever a view is built from a
/// dataset, so "lowest row index" and "lowest sample id" coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    ids: Vec<usize>,
    dim: usize,
    values: Vec<f64>,
}

impl Features {
    pub fn new(ids: Vec<usize>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch { left: values.len(), right: ids.len() * dim });
        }
        Ok(Self { ids, dim, values })
    }

    /// Builds a view from rows, numbering them `0..rows.len()`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: row.len() });
            }
            values.extend_from_slice(row);
        }
        Ok(Self { ids: (0..rows.len()).collect(), dim, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> usize {
        self.ids[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |r| self.row(r))
    }

    /// Distance between two rows of this view.
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        euclidean(self.row(a), self.row(b))
    }

    /// Restricts the view to the given rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Features {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Features { ids: rows.iter().map(|&r| self.ids[r]).collect(), dim: self.dim, values }
    }
}

/// One sample of a dataset, borrowed.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub id: usize,
    pub features: &'a [f64],
    pub label: ClassId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    MinMax,
    ZScore,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "min-max" | "minmax" => Ok(Normalization::MinMax),
            "z-score" | "zscore" => Ok(Normalization::ZScore),
            other => Err(Error::InvalidParameter(format!("unknown normalization {other:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::MinMax => "min-max",
            Normalization::ZScore => "z-score",
        })
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// The final column of the file.
    pub const LAST: &'static str = "last";
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name(Self::LAST.to_string())
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<ClassId>,
    class_names: Vec<String>,
    normalization: Normalization,
}

impl Dataset {
    /// Builds a dataset from feature rows and string labels. Ids are `0..n`.
    pub fn from_parts<S: AsRef<str>>(rows: &[Vec<f64>], labels: &[S]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { left: rows.len(), right: labels.len() });
        }
        let features = Features::from_rows(rows)?;
        let (labels, class_names) = intern_labels(labels.iter().map(AsRef::as_ref));
        Ok(Self { features, labels, class_names, normalization: Normalization::None })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    /// Label-free view over every sample.
    pub fn features(&self) -> &Features {
        &self.features
    }

    /// Label-free view over the given sample ids (sorted ascending).
    pub fn view(&self, ids: &[usize]) -> Features {
        let mut rows = ids.to_vec();
        rows.sort_unstable();
        self.features.select_rows(&rows)
    }

    pub fn sample(&self, id: usize) -> Sample<'_> {
        Sample { id, features: self.features.row(id), label: self.labels[id] }
    }

    pub fn label(&self, id: usize) -> ClassId {
        self.labels[id]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

fn intern_labels<'a>(raw: impl Iterator<Item = &'a str> + Clone) -> (Vec<ClassId>, Vec<String>) {
    let mut index: BTreeMap<&str, ClassId> = raw.clone().map(|l| (l, 0)).collect();
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let labels = raw.map(|l| index[l]).collect();
    (labels, index.into_keys().map(str::to_string).collect())
}

/// Loads a numeric CSV with one label column.
///
/// A header row is detected when the first row has a non-numeric value in a
/// feature position, or when the label column is designated by name.
pub fn load_dataset(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, label_column)
}

/// Like [`load_dataset`], reading from any source. Files without a comma on
/// their first line are treated as whitespace-separated.
pub fn read_dataset<R: std::io::Read>(mut reader: R, label_column: &LabelColumn) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| Error::io("<input>", e))?;
    if !text.lines().next().unwrap_or("").contains(',') {
        text = text.lines().map(|l| l.split_whitespace().collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join("\n");
    }
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::EmptyFile);
    };
    let width = first.len();

    let (label_idx, has_header) = match label_column {
        LabelColumn::Name(name) if name == LabelColumn::LAST => {
            let idx = width - 1;
            (idx, first.iter().enumerate().any(|(c, v)| c != idx && v.parse::<f64>().is_err()))
        }
        LabelColumn::Name(name) => {
            let idx = first.iter().position(|h| h == name).ok_or_else(|| Error::LabelColumn(name.clone()))?;
            (idx, true)
        }
        LabelColumn::Index(idx) => {
            if *idx >= width {
                return Err(Error::LabelColumn(idx.to_string()));
            }
            let header = first.iter().enumerate().any(|(c, v)| c != *idx && v.parse::<f64>().is_err());
            (*idx, header)
        }
    };

    let body = &records[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut rows = Vec::with_capacity(body.len());
    let mut labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::MalformedRow { line: *line, expected: width, found: rec.len() });
        }
        let mut row = Vec::with_capacity(width - 1);
        for (column, value) in rec.iter().enumerate() {
            if value.is_empty() {
                return Err(Error::MissingValue { line: *line, column });
            }
            if column == label_idx {
                continue;
            }
            let x: f64 =
                value.parse().map_err(|_| Error::NonNumeric { line: *line, column, value: value.to_string() })?;
            if !x.is_finite() {
                return Err(Error::NonNumeric { line: *line, column, value: value.to_string() });
            }
            row.push(x);
        }
        rows.push(row);
        labels.push(rec[label_idx].to_string());
    }
    Dataset::from_parts(&rows, &labels)
}

/// Rescales every feature column. Constant columns map to 0.
pub fn normalize(ds: &Dataset, method: Normalization) -> Dataset {
    let n = ds.len();
    let dim = ds.dim();
    let mut out = ds.clone();
    out.normalization = method;
    if method == Normalization::None || n == 0 {
        return out;
    }
    let src = &ds.features.values;
    let dst = &mut out.features.values;
    for c in 0..dim {
        let column = (0..n).map(|r| src[r * dim + c]);
        let (shift, scale) = match method {
            Normalization::MinMax => {
                let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                (lo, hi - lo)
            }
            Normalization::ZScore => {
                let mean = column.clone().sum::<f64>() / n as f64;
                let var = column.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            }
            Normalization::None => unreachable!(),
        };
        for r in 0..n {
            let i = r * dim + c;
            dst[i] = if scale > 0.0 { (src[i] - shift) / scale } else { 0.0 };
        }
    }
    out
}

/// Euclidean distance; callers guarantee equal lengths.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(euclidean(a, b))
}

/// Partition of a dataset's ids. All id lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolSplit {
    pub labeled_ids: Vec<usize>,
    pub unlabeled_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
    /// False when some class had fewer than two members and the split fell
    /// back to a plain shuffle.
    pub stratified: bool,
}

impl PoolSplit {
    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled_ids.len()
    }
}

/// Holds out `round(test_fraction * n)` samples for testing; the rest form
/// the unlabeled pool. The labeled set starts empty.
pub fn split_pool(ds: &Dataset, seed: u64, test_fraction: f64) -> Result<PoolSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let n = ds.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "{n} samples cannot be split into {n_test} test and {} pool samples (need >= 2 each)",
            n.saturating_sub(n_test)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for id in 0..n {
        by_class[ds.label(id)].push(id);
    }
    let stratified = by_class.iter().all(|members| members.len() >= 2);

    let mut test_ids = Vec::with_capacity(n_test);
    if stratified {
        let quotas =
            largest_remainder(&by_class.iter().map(|m| m.len() as f64 * test_fraction).collect::<Vec<_>>(), n_test);
        for (mut members, quota) in by_class.into_iter().zip(quotas) {
            members.shuffle(&mut rng);
            test_ids.extend_from_slice(&members[..quota]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test_ids.extend_from_slice(&all[..n_test]);
    }
    test_ids.sort_unstable();
    let mut is_test = vec![false; n];
    for &id in &test_ids {
        is_test[id] = true;
    }
    let unlabeled_ids = (0..n).filter(|&id| !is_test[id]).collect();
    Ok(PoolSplit { labeled_ids: Vec::new(), unlabeled_ids, test_ids, seed, stratified })
}

/// Floors each share, then hands the leftover units to the largest
/// fractional parts (ties to the lower index).
fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}
