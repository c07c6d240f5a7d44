//! Ingestion, encoding and scaling of tabular data.
//!
//! All variances are population variances (normalised by `n`), matching the
//! covariance module.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a dataset is in the preprocessing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingState {
    Raw,
    Zscored,
    GroupScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Numeric,
    Categorical,
}

/// A named block of columns originating from one source variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub kind: GroupKind,
    pub columns: Vec<usize>,
}

/// A categorical source column waiting for [`Dataset::onehot_encode`].
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub name: String,
    pub labels: Vec<String>,
    pub codes: Vec<usize>,
}

impl CategoricalColumn {
    pub fn label_of(&self, row: usize) -> &str {
        &self.labels[self.codes[row]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaPolicy {
    #[default]
    DropRow,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantColumnPolicy {
    #[default]
    Error,
    Zero,
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub na_policy: NaPolicy,
    pub na_tokens: Vec<String>,
    /// Columns to retain, by header name. `None` keeps every column.
    pub columns: Option<Vec<String>>,
    /// Columns to treat as categorical even if their fields parse as numbers.
    pub categorical: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            na_policy: NaPolicy::DropRow,
            na_tokens: vec![String::new(), "NA".to_string()],
            columns: None,
            categorical: Vec::new(),
        }
    }
}

/// An n×m table of finite reals with column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    column_groups: Vec<ColumnGroup>,
    pending: Vec<CategoricalColumn>,
    scaling: ScalingState,
}

/// Column-centred copy of a dataset's values.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredData {
    pub values: DMatrix<f64>,
    pub column_means: DVector<f64>,
}

impl CenteredData {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }
}

impl Dataset {
    /// Builds a raw numeric dataset; every column becomes its own group.
    pub fn new(column_names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let groups = singleton_groups(&column_names);
        let d = Self {
            values,
            column_names,
            column_groups: groups,
            pending: Vec::new(),
            scaling: ScalingState::Raw,
        };
        d.validate()?;
        Ok(d)
    }

    /// Row-major convenience constructor.
    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let m = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} values, expected {m}",
                rows[bad].len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        Self::new(column_names, values)
    }

    /// Dataset with generated names `x1..xm`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(names, values)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = self.values.shape();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, got {n}")));
        }
        if m + self.pending.len() == 0 {
            return Err(Error::InvalidDataset("no columns".into()));
        }
        if self.column_names.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {m} columns",
                self.column_names.len()
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % n, pos / n);
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {i}, column `{}`",
                self.column_names[j]
            )));
        }
        let mut seen = vec![false; m];
        for g in &self.column_groups {
            for &c in &g.columns {
                if c >= m || seen[c] {
                    return Err(Error::InvalidDataset(format!(
                        "column groups do not partition the columns (group `{}`)",
                        g.name
                    )));
                }
                seen[c] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidDataset("column groups do not cover every column".into()));
        }
        for p in &self.pending {
            if p.codes.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "categorical column `{}` has {} rows, expected {n}",
                    p.name,
                    p.codes.len()
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_groups(&self) -> &[ColumnGroup] {
        &self.column_groups
    }

    pub fn scaling_state(&self) -> ScalingState {
        self.scaling
    }

    /// Categorical columns not yet expanded into indicator groups.
    pub fn pending_categorical(&self) -> &[CategoricalColumn] {
        &self.pending
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Attach categorical side information (factors) that is carried along
    /// but not yet encoded.
    pub fn with_categorical(mut self, column: CategoricalColumn) -> Result<Self> {
        self.pending.push(column);
        self.validate()?;
        Ok(self)
    }

    /// Same provenance, new values of the same shape.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::DimensionMismatch(format!(
                "expected {:?}, got {:?}",
                self.values.shape(),
                values.shape()
            )));
        }
        let d = Self { values, ..self.clone() };
        d.validate()?;
        Ok(d)
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.n_rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::InvalidArgument(format!("row {bad} out of range (n={n})")));
        }
        let values = self.values.select_rows(rows.iter());
        let pending = self
            .pending
            .iter()
            .map(|p| CategoricalColumn {
                name: p.name.clone(),
                labels: p.labels.clone(),
                codes: rows.iter().map(|&r| p.codes[r]).collect(),
            })
            .collect();
        let d = Self {
            values,
            pending,
            ..self.clone()
        };
        d.validate()?;
        Ok(d)
    }

    /// Scales every numeric column to zero mean and unit population variance.
    /// Indicator groups produced by one-hot encoding are left alone.
    pub fn zscore(&self, policy: ConstantColumnPolicy) -> Result<Self> {
        let n = self.n_rows() as f64;
        let mut values = self.values.clone();
        for g in self.column_groups.iter().filter(|g| g.kind == GroupKind::Numeric) {
            for &j in &g.columns {
                let mut col = values.column_mut(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd <= 1e-12 * (1.0 + mean.abs()) {
                    match policy {
                        ConstantColumnPolicy::Error => {
                            return Err(Error::ConstantColumn(self.column_names[j].clone()))
                        }
                        ConstantColumnPolicy::Zero => col.fill(0.0),
                    }
                } else {
                    col.apply(|x| *x = (*x - mean) / sd);
                }
            }
        }
        let scaling = if self.has_categorical_groups() {
            ScalingState::GroupScaled
        } else {
            ScalingState::Zscored
        };
        Ok(Self {
            values,
            scaling,
            ..self.clone()
        })
    }

    fn has_categorical_groups(&self) -> bool {
        self.column_groups.iter().any(|g| g.kind == GroupKind::Categorical)
    }

    /// Expands every pending categorical column into indicator columns,
    /// scaled so that each group's total population variance is one.
    pub fn onehot_encode(&self) -> Result<Self> {
        if self.pending.is_empty() {
            return Ok(self.clone());
        }
        let n = self.n_rows();
        let mut names = self.column_names.clone();
        let mut groups = self.column_groups.clone();
        let mut blocks: Vec<DMatrix<f64>> = vec![self.values.clone()];
        let mut next_col = self.n_cols();
        for cat in &self.pending {
            let l = cat.labels.len();
            let mut counts = vec![0usize; l];
            for &c in &cat.codes {
                counts[c] += 1;
            }
            let used: Vec<usize> = (0..l).filter(|&k| counts[k] > 0).collect();
            if used.len() < 2 {
                return Err(Error::SingleLabel(cat.name.clone()));
            }
            let total_var: f64 = used
                .iter()
                .map(|&k| {
                    let p = counts[k] as f64 / n as f64;
                    p * (1.0 - p)
                })
                .sum();
            let scale = 1.0 / total_var.sqrt();
            let block = DMatrix::from_fn(n, used.len(), |i, k| {
                if cat.codes[i] == used[k] {
                    scale
                } else {
                    0.0
                }
            });
            groups.push(ColumnGroup {
                name: cat.name.clone(),
                kind: GroupKind::Categorical,
                columns: (next_col..next_col + used.len()).collect(),
            });
            names.extend(used.iter().map(|&k| format!("{}={}", cat.name, cat.labels[k])));
            next_col += used.len();
            blocks.push(block);
        }
        let mut values = DMatrix::zeros(n, next_col);
        let mut at = 0;
        for b in &blocks {
            values.columns_mut(at, b.ncols()).copy_from(b);
            at += b.ncols();
        }
        let d = Self {
            values,
            column_names: names,
            column_groups: groups,
            pending: Vec::new(),
            scaling: ScalingState::GroupScaled,
        };
        d.validate()?;
        Ok(d)
    }

    /// Subtracts each column's mean.
    pub fn center(&self) -> CenteredData {
        center_matrix(&self.values)
    }

    /// Writes the dataset (numeric columns, then pending categorical labels)
    /// in the comma-delimited dialect accepted by [`load_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header = self
            .column_names
            .iter()
            .map(String::as_str)
            .chain(self.pending.iter().map(|p| p.name.as_str()));
        w.write_record(header).map_err(csv_err)?;
        for i in 0..self.n_rows() {
            let row = self
                .values
                .row(i)
                .iter()
                .map(|v| v.to_string())
                .chain(self.pending.iter().map(|p| p.label_of(i).to_string()))
                .collect::<Vec<_>>();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Centres the columns of a raw matrix.
pub fn center_matrix(values: &DMatrix<f64>) -> CenteredData {
    let n = values.nrows() as f64;
    let means = DVector::from_iterator(values.ncols(), values.column_iter().map(|c| c.sum() / n));
    let mut centered = values.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    CenteredData {
        values: centered,
        column_means: means,
    }
}

fn singleton_groups(names: &[String]) -> Vec<ColumnGroup> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| ColumnGroup {
            name: name.clone(),
            kind: GroupKind::Numeric,
            columns: vec![j],
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match line {
        Some(line) => Error::BadRow {
            line,
            message: e.to_string(),
        },
        None => Error::Csv(e.to_string()),
    }
}

/// Parses delimited text into a raw dataset. Columns whose fields all parse as
/// finite numbers are numeric; the rest are kept as categorical columns
/// pending encoding.
pub fn load_csv<R: Read>(source: R, options: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let mut header: Option<Vec<String>> = None;
    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = rec.iter().map(|f| f.trim().to_string()).collect();
        if options.has_header && header.is_none() {
            header = Some(fields);
            continue;
        }
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        let width = header.as_ref().map_or_else(|| records.first().map(|r| r.1.len()), |h| Some(h.len()));
        if let Some(width) = width {
            if fields.len() != width {
                return Err(Error::BadRow {
                    line,
                    message: format!("expected {width} fields, found {}", fields.len()),
                });
            }
        }
        records.push((line, fields));
    }
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    let width = records[0].1.len();
    let header = header.unwrap_or_else(|| (1..=width).map(|j| format!("V{j}")).collect());

    let retained: Vec<usize> = match &options.columns {
        Some(keep) => keep
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::UnknownColumn(name.clone()))
            })
            .collect::<Result<_>>()?,
        None => (0..width).collect(),
    };
    for name in &options.categorical {
        if !retained.iter().any(|&c| &header[c] == name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let is_na = |s: &str| options.na_tokens.iter().any(|t| t == s);
    let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());

    // drop NA rows first so type detection only sees retained rows
    let mut rows: Vec<&Vec<String>> = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        let has_na = retained.iter().any(|&c| is_na(&fields[c]) || is_nan_token(&fields[c]));
        if has_na {
            match options.na_policy {
                NaPolicy::DropRow => continue,
                NaPolicy::Error => {
                    return Err(Error::BadRow {
                        line: *line,
                        message: "missing value".into(),
                    })
                }
            }
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }

    let mut numeric_names = Vec::new();
    let mut numeric_cols: Vec<Vec<f64>> = Vec::new();
    let mut pending = Vec::new();
    for &c in &retained {
        let forced = options.categorical.iter().any(|n| n == &header[c]);
        let parsed: Option<Vec<f64>> = if forced {
            None
        } else {
            rows.iter().map(|r| parse(&r[c])).collect()
        };
        match parsed {
            Some(col) => {
                numeric_names.push(header[c].clone());
                numeric_cols.push(col);
            }
            None => {
                let labels: Vec<String> = rows
                    .iter()
                    .map(|r| r[c].clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let codes = rows
                    .iter()
                    .map(|r| labels.binary_search(&r[c]).expect("label present"))
                    .collect();
                pending.push(CategoricalColumn {
                    name: header[c].clone(),
                    labels,
                    codes,
                });
            }
        }
    }

    let n = rows.len();
    let values = DMatrix::from_fn(n, numeric_cols.len(), |i, j| numeric_cols[j][i]);
    let d = Dataset {
        column_groups: singleton_groups(&numeric_names),
        column_names: numeric_names,
        values,
        pending,
        scaling: ScalingState::Raw,
    };
    d.validate()?;
    Ok(d)
}

fn is_nan_token(s: &str) -> bool {
    matches!(s.parse::<f64>(), Ok(v) if !v.is_finite())
}
