//! Labeled CSV tables and per-row class probability matrices.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Allowed deviation of a probability row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// A dataset with one categorical label column. Feature cells are kept as
/// trimmed text; numeric views are produced on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    /// Header in file order, including the label column.
    pub columns: Vec<String>,
    pub label_column: String,
    /// Feature column names (header minus the label column), in file order.
    pub feature_names: Vec<String>,
    /// Row-major feature cells aligned with `feature_names`.
    pub features: Vec<Vec<String>>,
    pub labels: Vec<String>,
    /// Sorted distinct labels. Probability columns follow this order.
    pub class_names: Vec<String>,
    pub data_version: String,
}

fn sorted_classes(labels: &[String]) -> Vec<String> {
    labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

impl LabeledTable {
    /// Builds a table from in-memory columns; `header` must contain `label_column`.
    pub fn from_rows(
        header: Vec<String>,
        rows: Vec<Vec<String>>,
        label_column: &str,
        data_version: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(Error::data(format!("duplicate column {dup:?}")));
        }
        let label_at = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::data(format!("label column {label_column:?} not found")))?;
        if rows.is_empty() {
            return Err(Error::data("table has no rows"));
        }
        let mut features = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != header.len() {
                return Err(Error::data(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            let mut cells: Vec<String> = row.into_iter().map(|c| c.trim().to_string()).collect();
            labels.push(cells.remove(label_at));
            features.push(cells);
        }
        let mut feature_names = header.clone();
        feature_names.remove(label_at);
        let class_names = sorted_classes(&labels);
        Ok(LabeledTable {
            columns: header,
            label_column: label_column.to_string(),
            feature_names,
            features,
            labels,
            class_names,
            data_version: data_version.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Labels as indices into `class_names`.
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .map(|l| self.class_names.binary_search(l).expect("labels are drawn from class_names"))
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Parses one feature column as numbers, if every cell is numeric.
    pub fn numeric_column(&self, index: usize) -> Option<Vec<f64>> {
        self.features.iter().map(|row| row[index].parse::<f64>().ok()).collect()
    }

    /// Numeric matrix over `columns` (all features when `None`), row-major.
    pub fn numeric_matrix(&self, columns: Option<&[String]>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let names: Vec<String> = match columns {
            Some(c) => c.to_vec(),
            None => self.feature_names.clone(),
        };
        let mut cols = Vec::with_capacity(names.len());
        for name in &names {
            let idx = self
                .feature_index(name)
                .ok_or_else(|| Error::data(format!("feature column {name:?} not found")))?;
            let col = self
                .numeric_column(idx)
                .ok_or_else(|| Error::data(format!("feature column {name:?} is not numeric")))?;
            cols.push(col);
        }
        let rows = (0..self.n_rows()).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        Ok((names, rows))
    }

    /// Canonical text of row `r` (features then label) for exact-match
    /// comparisons: trimmed cells, numbers in shortest round-trip form.
    pub fn canonical_row(&self, r: usize) -> String {
        let mut out = String::new();
        for cell in self.features[r].iter().chain(std::iter::once(&self.labels[r])) {
            if !out.is_empty() {
                out.push('\u{1f}');
            }
            match cell.parse::<f64>() {
                Ok(0.0) => out.push('0'),
                Ok(v) => out.push_str(&v.to_string()),
                Err(_) => out.push_str(cell),
            }
        }
        out
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::data(format!("{} is empty", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Reads a header-first CSV with a categorical `label_column`.
pub fn load_labeled_table(path: &Path, label_column: &str, data_version: &str) -> Result<LabeledTable> {
    let (header, rows) = read_csv(path)?;
    LabeledTable::from_rows(header, rows, label_column, data_version)
}

/// Relabels every row whose label differs from `keep` as `other_name`.
pub fn collapse_classes(table: &LabeledTable, keep: &str, other_name: &str) -> Result<LabeledTable> {
    if !table.class_names.iter().any(|c| c == keep) {
        return Err(Error::data(format!("class {keep:?} not present")));
    }
    if keep == other_name {
        return Err(Error::data(format!("other class name {other_name:?} collides with kept class")));
    }
    let mut out = table.clone();
    for label in &mut out.labels {
        if label != keep {
            *label = other_name.to_string();
        }
    }
    out.class_names = sorted_classes(&out.labels);
    Ok(out)
}

/// Per-row class probabilities, columns in `class_names` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    rows: Vec<Vec<f64>>,
    n_classes: usize,
}

impl PredictionMatrix {
    /// Validates shape, range and row sums.
    pub fn from_rows(rows: Vec<Vec<f64>>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::data("prediction matrix needs at least one class"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_classes {
                return Err(Error::data(format!(
                    "prediction row {} has {} columns, expected {n_classes}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::data(format!("prediction row {} has probability {p} outside [0,1]", i + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::data(format!("prediction row {} sums to {sum}", i + 1)));
            }
        }
        Ok(PredictionMatrix { rows, n_classes })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Same matrix with columns reordered so new column `perm[j]` holds old column `j`.
    pub fn permute_classes(&self, perm: &[usize]) -> PredictionMatrix {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out = vec![0.0; self.n_classes];
                for (j, p) in row.iter().enumerate() {
                    out[perm[j]] = *p;
                }
                out
            })
            .collect();
        PredictionMatrix {
            rows,
            n_classes: self.n_classes,
        }
    }
}

/// Reads a probability CSV whose header names the classes in sorted order.
pub fn load_prediction_matrix(path: &Path, table: &LabeledTable) -> Result<PredictionMatrix> {
    let (header, rows) = read_csv(path)?;
    if header.len() != table.n_classes() {
        return Err(Error::data(format!(
            "prediction file has {} columns, table has {} classes",
            header.len(),
            table.n_classes()
        )));
    }
    if header != table.class_names {
        return Err(Error::data(format!(
            "prediction columns {header:?} do not match class order {:?}",
            table.class_names
        )));
    }
    if rows.len() != table.n_rows() {
        return Err(Error::data(format!(
            "prediction file has {} rows, table has {}",
            rows.len(),
            table.n_rows()
        )));
    }
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|_| Error::data(format!("prediction row {} has non-numeric cell {cell:?}", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionMatrix::from_rows(parsed, table.n_classes())
}
