//! Datasets: CSV ingestion, preprocessing, the correlated-Gaussian synthetic
//! generator and k-fold splitting.
//!
//! Preprocessing min-max scales every column to `[0, 1]`, optionally appends
//! an intercept column of ones, then caps each row at unit L2 norm. The
//! statistics come from whatever dataset is passed in; callers that split
//! afterwards share the same scaling across folds.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{sigmoid, Example};
use crate::mechanisms::{NoiseSource, StreamTag};
use crate::vector::{dot, norm2};

/// Name given to the appended intercept column.
pub const INTERCEPT_NAME: &str = "intercept";

/// Record of the transform applied by [`preprocess`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub column_min: Vec<f64>,
    pub column_max: Vec<f64>,
    pub intercept: bool,
    pub norm_cap: f64,
}

impl Preprocessing {
    /// Applies the recorded scaling to another raw dataset with the same columns.
    pub fn apply(&self, raw: &Dataset) -> Result<Dataset> {
        if raw.dim() != self.column_min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.column_min.len(),
                found: raw.dim(),
            });
        }
        let p_in = raw.dim();
        let p_out = p_in + usize::from(self.intercept);
        let mut features = Vec::with_capacity(raw.len() * p_out);
        for i in 0..raw.len() {
            let start = features.len();
            for (j, &v) in raw.row(i).iter().enumerate() {
                let range = self.column_max[j] - self.column_min[j];
                features.push(if range > 0.0 {
                    ((v - self.column_min[j]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                });
            }
            if self.intercept {
                features.push(1.0);
            }
            let row = &mut features[start..];
            let n = norm2(row);
            if n > self.norm_cap {
                let f = self.norm_cap / n;
                row.iter_mut().for_each(|v| *v *= f);
            }
        }
        let mut names = raw.feature_names.clone();
        if self.intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        Ok(Dataset {
            features,
            labels: raw.labels.clone(),
            dim: p_out,
            feature_names: names,
            preprocessing: Some(self.clone()),
        })
    }

    /// Number of columns before the intercept was appended.
    pub fn raw_dim(&self) -> usize {
        self.column_min.len()
    }
}

/// A dense row-major feature matrix with `{-1, +1}` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    feature_names: Vec<String>,
    preprocessing: Option<Preprocessing>,
}

impl Dataset {
    /// `features` is row-major with `dim` columns; labels must be `-1` or `+1`.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l != 1.0 && l != -1.0) {
            return Err(Error::Parse {
                row: i,
                column: dim,
                message: format!("label {l} is not -1 or +1"),
            });
        }
        let feature_names = (1..=dim).map(|j| format!("f{j}")).collect();
        Ok(Self {
            features,
            labels,
            dim,
            feature_names,
            preprocessing: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn preprocessing(&self) -> Option<&Preprocessing> {
        self.preprocessing.as_ref()
    }

    pub fn example(&self, i: usize) -> Example<'_> {
        Example {
            features: self.row(i),
            label: self.labels[i],
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = Example<'_>> + '_ {
        (0..self.len()).map(move |i| self.example(i))
    }

    /// Rows at `indices`, in that order, keeping names and preprocessing.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            feature_names: self.feature_names.clone(),
            preprocessing: self.preprocessing.clone(),
        }
    }

    /// Writes a CSV with a header of feature names followed by `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = self.feature_names.join(",");
        header.push_str(",label\n");
        w.write_all(header.as_bytes())?;
        for i in 0..self.len() {
            let mut line = String::new();
            for v in self.row(i) {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(&self.labels[i].to_string());
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which column of a CSV file holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

/// Reads a numeric CSV. Labels in `{0, 1}` are remapped to `{-1, +1}`.
pub fn load_csv(path: &Path, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, label, has_header)
}

pub fn read_csv<R: std::io::Read>(input: R, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let header: Option<Vec<String>> = if has_header {
        let h = reader
            .headers()
            .map_err(|e| Error::Io(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        Some(h)
    } else {
        None
    };

    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut cells: Vec<Vec<f64>> = Vec::new();
    let row_offset = usize::from(has_header);
    for (r, record) in reader.records().enumerate() {
        let row = r + row_offset;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: record.len(),
            });
        }
        let parsed = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: c,
                        message: format!("'{cell}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        cells.push(parsed);
    }
    let width = match width {
        Some(w) if !cells.is_empty() => w,
        _ => return Err(Error::EmptyDataset),
    };
    if width < 2 {
        return Err(Error::InvalidConfig(
            "need at least one feature and a label column".into(),
        ));
    }

    let label_idx = match label {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::InvalidConfig(format!(
                "label column {i} out of range (width {width})"
            )))
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::InvalidConfig(format!("no column named '{name}'")))?,
    };

    let raw_labels: Vec<f64> = cells.iter().map(|r| r[label_idx]).collect();
    let zero_one = raw_labels.iter().all(|&l| l == 0.0 || l == 1.0);
    let mut labels = Vec::with_capacity(raw_labels.len());
    for (i, &l) in raw_labels.iter().enumerate() {
        labels.push(match l {
            _ if zero_one => 2.0 * l - 1.0,
            1.0 | -1.0 => l,
            _ => {
                return Err(Error::Parse {
                    row: i + row_offset,
                    column: label_idx,
                    message: format!("label {l} is not in {{-1, 1}} or {{0, 1}}"),
                })
            }
        });
    }

    let dim = width - 1;
    let mut features = Vec::with_capacity(cells.len() * dim);
    for row in &cells {
        features.extend(row.iter().enumerate().filter(|(c, _)| *c != label_idx).map(|(_, v)| *v));
    }
    let names = match header {
        Some(h) => h
            .into_iter()
            .enumerate()
            .filter(|(c, _)| *c != label_idx)
            .map(|(_, n)| n)
            .collect(),
        None => (1..=dim).map(|j| format!("f{j}")).collect(),
    };
    Dataset::new(features, labels, dim)?.with_feature_names(names)
}

/// Min-max scaling, optional intercept, then per-row capping at unit norm.
///
/// A dataset that already carries a preprocessing record is returned as is.
pub fn preprocess(raw: &Dataset, add_intercept: bool) -> Dataset {
    if raw.preprocessing.is_some() {
        return raw.clone();
    }
    let p = raw.dim();
    let mut column_min = vec![f64::INFINITY; p];
    let mut column_max = vec![f64::NEG_INFINITY; p];
    for i in 0..raw.len() {
        for (j, &v) in raw.row(i).iter().enumerate() {
            column_min[j] = column_min[j].min(v);
            column_max[j] = column_max[j].max(v);
        }
    }
    if raw.is_empty() {
        column_min.fill(0.0);
        column_max.fill(0.0);
    }
    let record = Preprocessing {
        column_min,
        column_max,
        intercept: add_intercept,
        norm_cap: 1.0,
    };
    record
        .apply(raw)
        .expect("record was built from this dataset's own columns")
}

/// Parameters of the correlated-Gaussian logistic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    /// Feature covariance is `ar^|i-j|`.
    pub ar: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            dim: 100,
            ar: 0.5,
            seed,
        }
    }

    /// `(0.5, 1, ..., 5)`, its negation, then zeros; truncated to `dim`.
    pub fn true_model(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| match j {
                0..=9 => 0.5 * (j + 1) as f64,
                10..=19 => -0.5 * (j - 9) as f64,
                _ => 0.0,
            })
            .collect()
    }

    /// Indices of the non-zero coordinates of [`SyntheticSpec::true_model`].
    pub fn relevant_features(&self) -> Vec<usize> {
        (0..self.dim.min(20)).collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.ar.powi(i.abs_diff(j) as i32))
    }
}

/// Draws `n` rows `s ~ N(0, Sigma)` with `Sigma_ij = ar^|i-j|`, and labels
/// `+1` with probability `1 / (1 + exp(-x*'s + iota))`, `iota ~ N(0, 1)`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 || spec.dim == 0 {
        return Err(Error::InvalidConfig("synthetic data needs n >= 1 and dim >= 1".into()));
    }
    if !(spec.ar.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "AR coefficient {} must lie in (-1, 1)",
            spec.ar
        )));
    }
    let chol = spec
        .covariance()
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("covariance is not positive definite".into()))?;
    let lower = chol.l();
    let truth = spec.true_model();
    let source = NoiseSource::new(spec.seed);

    let mut features = Vec::with_capacity(spec.n * spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    let mut white = DVector::<f64>::zeros(spec.dim);
    for i in 0..spec.n {
        let mut rng = source.stream(StreamTag::Synthetic, i as u64);
        for w in white.iter_mut() {
            *w = StandardNormal.sample(&mut rng);
        }
        let row = &lower * &white;
        let iota: f64 = StandardNormal.sample(&mut rng);
        let p_pos = sigmoid(dot(&truth, row.as_slice()) - iota);
        let u: f64 = rng.random();
        labels.push(if u < p_pos { 1.0 } else { -1.0 });
        features.extend_from_slice(row.as_slice());
    }
    Dataset::new(features, labels, spec.dim)
}

/// One cross-validation split.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Dataset,
    pub test: Dataset,
    pub test_indices: Vec<usize>,
}

/// Shuffles row indices with `seed` and cuts them into `k` folds whose
/// sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = NoiseSource::new(seed).stream(StreamTag::Shuffle, 0);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

pub fn kfold_split(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let folds = kfold_indices(data.len(), k, seed)?;
    let mut in_test = vec![usize::MAX; data.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_test[i] = f;
        }
    }
    Ok(folds
        .into_iter()
        .enumerate()
        .map(|(f, test_indices)| {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| in_test[i] != f).collect();
            Fold {
                train: data.subset(&train_idx),
                test: data.subset(&test_indices),
                test_indices,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str, header: bool) -> Result<Dataset> {
        read_csv(text.as_bytes(), &LabelColumn::Last, header)
    }

    #[test]
    fn loads_small_file() {
        let d = csv("a,b,y\n1,2,1\n3,4,-1\n", true).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.labels(), &[1.0, -1.0]);
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn remaps_zero_one_labels() {
        let d = csv("1,2,0\n3,4,1\n", false).unwrap();
        assert_eq!(d.labels(), &[-1.0, 1.0]);
        let d = read_csv("y,a\n1,5\n0,6\n".as_bytes(), &LabelColumn::Name("y".into()), true).unwrap();
        assert_eq!(d.labels(), &[1.0, -1.0]);
        assert_eq!(d.row(0), &[5.0]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            csv("1,2,1\n3,1\n", false),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            csv("1,x,1\n", false),
            Err(Error::Parse { row: 0, column: 1, .. })
        ));
        assert!(matches!(csv("", false), Err(Error::EmptyDataset)));
        assert!(matches!(csv("a,b\n", true), Err(Error::EmptyDataset)));
        assert!(matches!(csv("1,2,3\n", false), Err(Error::Parse { .. })));
    }

    #[test]
    fn preprocess_examples() {
        let raw = Dataset::new(vec![2.0, 7.0, 4.0, 7.0], vec![1.0, -1.0], 2).unwrap();
        let p = preprocess(&raw, false);
        assert_eq!(p.row(0), &[0.0, 0.0]);
        assert_eq!(p.row(1), &[1.0, 0.0]);

        let p = preprocess(&raw, true);
        assert_eq!(p.dim(), 3);
        let n = norm2(p.row(1));
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(p.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(p.feature_names().last().unwrap(), INTERCEPT_NAME);
    }

    #[test]
    fn preprocess_is_idempotent_and_bounded() {
        let raw = generate_synthetic(&SyntheticSpec {
            n: 300,
            dim: 12,
            ar: 0.5,
            seed: 3,
        })
        .unwrap();
        let once = preprocess(&raw, true);
        for i in 0..once.len() {
            assert!(norm2(once.row(i)) <= 1.0 + 1e-12);
            assert!(once.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(preprocess(&once, true), once);
        assert_eq!(once.preprocessing().unwrap().apply(&raw).unwrap(), once);
    }

    #[test]
    fn synthetic_truth_and_determinism() {
        let spec = SyntheticSpec::new(50, 9);
        let x = spec.true_model();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 20);
        assert_eq!(&x[..3], &[0.5, 1.0, 1.5]);
        assert_eq!(x[9], 5.0);
        assert_eq!(x[10], -0.5);
        assert_eq!(x[19], -5.0);
        assert!(spec.covariance().cholesky().is_some());
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec::new(50, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kfold_contract() {
        let folds = kfold_indices(10, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));

        let folds = kfold_indices(23, 4, 5).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        assert!(kfold_indices(5, 1, 0).is_err());
        assert!(kfold_indices(5, 6, 0).is_err());

        let raw = Dataset::new((0..20).map(f64::from).collect(), vec![1.0; 10], 2).unwrap();
        for fold in kfold_split(&raw, 3, 0).unwrap() {
            assert_eq!(fold.train.len() + fold.test.len(), 10);
            for (t, &i) in fold.test_indices.iter().enumerate() {
                assert_eq!(fold.test.row(t), raw.row(i));
            }
        }
    }

    #[test]
    fn csv_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = generate_synthetic(&SyntheticSpec {
            n: 5,
            dim: 3,
            ar: 0.5,
            seed: 1,
        })
        .unwrap();
        d.write_csv(&path).unwrap();
        let back = load_csv(&path, &LabelColumn::Last, true).unwrap();
        assert_eq!(back, d);
    }
}
