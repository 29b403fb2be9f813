use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Named feature columns, one target column and per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    features: Matrix,
    targets: Vec<f64>,
    synthetic: Vec<bool>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        features: Matrix,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let n = targets.len();
        Self::with_flags(feature_names, target_name, features, targets, vec![false; n])
    }

    pub fn with_flags(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        features: Matrix,
        targets: Vec<f64>,
        synthetic: Vec<bool>,
    ) -> Result<Self> {
        if features.rows() != targets.len() || targets.len() != synthetic.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows, {} targets, {} flags",
                features.rows(),
                targets.len(),
                synthetic.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if !features.is_finite() || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains NaN or infinite values".into()));
        }
        Ok(Self {
            feature_names,
            target_name: target_name.into(),
            features,
            targets,
            synthetic,
        })
    }

    /// Convenience constructor with generated names `x1..xn` and target `y`.
    pub fn from_xy(features: Matrix, targets: Vec<f64>) -> Result<Self> {
        let names = (1..=features.cols()).map(|i| format!("x{i}")).collect();
        Self::new(names, "y", features, targets)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn synthetic_flags(&self) -> &[bool] {
        &self.synthetic
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|s| **s).count()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            features: self.features.select_rows(idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            synthetic: idx.iter().map(|&i| self.synthetic[i]).collect(),
        }
    }

    /// Rows not flagged synthetic.
    pub fn real_only(&self) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| !self.synthetic[i]).collect();
        self.select(&idx)
    }

    /// Appends rows of `other` (same schema) after the rows of `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.feature_names != self.feature_names {
            return Err(Error::Dimension("cannot concatenate datasets with different columns".into()));
        }
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        let mut synthetic = self.synthetic.clone();
        synthetic.extend_from_slice(&other.synthetic);
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            features: self.features.vstack(&other.features)?,
            targets,
            synthetic,
        })
    }

    /// Same rows and targets with a replaced feature block.
    pub fn with_features(&self, names: Vec<String>, features: Matrix) -> Result<Dataset> {
        Dataset::with_flags(
            names,
            self.target_name.clone(),
            features,
            self.targets.clone(),
            self.synthetic.clone(),
        )
    }

    /// Same rows with the target values replaced.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::with_flags(
            self.feature_names.clone(),
            self.target_name.clone(),
            self.features.clone(),
            targets,
            self.synthetic.clone(),
        )
    }

    /// Row-wise `[features..., target]` matrix.
    pub fn joint_matrix(&self) -> Matrix {
        let d = self.n_features();
        let mut m = Matrix::zeros(self.len(), d + 1);
        for i in 0..self.len() {
            let row = m.row_mut(i);
            row[..d].copy_from_slice(self.features.row(i));
            row[d] = self.targets[i];
        }
        m
    }
}

/// Reads a CSV file; the target is `target_column` or the last column.
pub fn load_csv(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_column)
}

pub fn read_csv<R: Read>(reader: R, target_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 {
        return Err(Error::Csv(format!("need at least 2 columns, found {}", headers.len())));
    }
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateHeader(h.clone()));
        }
    }
    let target_idx = match target_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?,
        None => headers.len() - 1,
    };

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = record.position().map_or(targets.len() + 2, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut values = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = match cell.parse() {
                Ok(v) if f64::is_finite(v) => v,
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column: headers[j].clone(),
                        value: cell.to_string(),
                    })
                }
            };
            if j == target_idx {
                targets.push(v);
            } else {
                values.push(v);
            }
        }
        features.extend(values);
    }
    if targets.len() < 2 {
        return Err(Error::EmptyDataset(format!("need at least 2 data rows, found {}", targets.len())));
    }
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let features = Matrix::from_vec(targets.len(), names.len(), features)?;
    Dataset::new(names, headers[target_idx].clone(), features, targets)
}

/// Seeded shuffled partition into train/validation/test.
///
/// Train and validation sizes are `⌊n·frac⌋`; the remainder goes to test.
pub fn split(d: &Dataset, train_frac: f64, val_frac: f64, rng: &mut Rng) -> Result<(Dataset, Dataset, Dataset)> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be positive with sum < 1 (got {train_frac}, {val_frac})"
        )));
    }
    let n = d.len();
    let n_train = (n as f64 * train_frac + 1e-9).floor() as usize;
    let n_val = (n as f64 * val_frac + 1e-9).floor() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::EmptyDataset(format!(
            "split of {n} rows gives {n_train}/{n_val}/{n_test}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    Ok((
        d.select(&idx[..n_train]),
        d.select(&idx[n_train..n_train + n_val]),
        d.select(&idx[n_train + n_val..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "f,P,Ra\n10,4,120\n15,5,95\n20,6,80\n";

    #[test]
    fn parses_default_target() {
        let d = read_csv(SAMPLE.as_bytes(), None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature_names(), &["f".to_string(), "P".to_string()]);
        assert_eq!(d.target_name(), "Ra");
        assert_eq!(d.targets(), &[120.0, 95.0, 80.0]);
        assert!(d.synthetic_flags().iter().all(|s| !s));
    }

    #[test]
    fn parses_named_target() {
        let d = read_csv(SAMPLE.as_bytes(), Some("P")).unwrap();
        assert_eq!(d.feature_names(), &["f".to_string(), "Ra".to_string()]);
        assert_eq!(d.targets(), &[4.0, 5.0, 6.0]);
        assert_eq!(d.features().row(1), &[15.0, 95.0]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let err = read_csv("f,P,Ra\nabc,4,120\n15,5,95\n".as_bytes(), None).unwrap_err();
        match err {
            Error::NonNumeric { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "f");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_msg("f,P,Ra\n1,2,3\n4,x,6\n").contains("row 3"));
    }

    fn err_msg(s: &str) -> String {
        read_csv(s.as_bytes(), None).unwrap_err().to_string()
    }

    #[test]
    fn rejects_bad_headers_and_shapes() {
        assert!(matches!(
            read_csv("a,a\n1,2\n3,4\n".as_bytes(), None),
            Err(Error::DuplicateHeader(_))
        ));
        assert!(matches!(
            read_csv(SAMPLE.as_bytes(), Some("nope")),
            Err(Error::UnknownColumn(_))
        ));
        assert!(read_csv("a\n1\n2\n".as_bytes(), None).is_err());
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), None),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_csv("/definitely/not/here.csv", None), Err(Error::Io { .. })));
    }

    fn numbered(n: usize) -> Dataset {
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::from_xy(x, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (a, b, c) = split(&numbered(100), 0.8, 0.1, &mut Rng::new(1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (80, 10, 10));
        let (a, b, c) = split(&numbered(10), 0.8, 0.1, &mut Rng::new(1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_seeded() {
        let d = numbered(50);
        let first = split(&d, 0.6, 0.2, &mut Rng::new(9)).unwrap();
        let second = split(&d, 0.6, 0.2, &mut Rng::new(9)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn split_rejects_empty_parts() {
        assert!(split(&numbered(5), 0.8, 0.1, &mut Rng::new(1)).is_err());
        assert!(split(&numbered(50), 0.9, 0.1, &mut Rng::new(1)).is_err());
        assert!(split(&numbered(50), 0.0, 0.1, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn real_only_drops_synthetic() {
        let d = numbered(4);
        let s = Dataset::with_flags(
            d.feature_names().to_vec(),
            "y",
            d.features().clone(),
            d.targets().to_vec(),
            vec![false, true, false, true],
        )
        .unwrap();
        assert_eq!(s.real_only().targets(), &[0.0, 2.0]);
        assert_eq!(s.n_synthetic(), 2);
    }
}
