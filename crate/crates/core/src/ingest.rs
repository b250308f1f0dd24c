//! Tabular ingestion: CSV loading, schema inference, categorical encoding
//! and minmax scaling of candidate variables into `[0, 1]`.
//!
//! Categories are assigned integer codes `1..=K` in lexicographic order of
//! the category token, so the encoding is independent of row order.
//! Candidate columns are minmax-scaled after encoding; constant columns map
//! to 0.5 everywhere. Target columns pass through unscaled.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Candidate,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// A single table cell. Missing cells come from empty CSV fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(f64),
    Missing,
}

impl Cell {
    fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Parse a token as a finite real, `None` if it is not one.
fn parse_number(token: &str) -> Option<f64> {
    token
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
}

/// A parsed table: a column schema plus one `Cell` per column per row.
#[derive(Debug, Clone)]
pub struct RawTable {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
}

impl RawTable {
    /// Build a table from parts, validating row arity and cell/kind
    /// consistency (numerical columns hold only numbers or missing).
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        check_unique_names(&schema)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::RowArity {
                    row: i + 1,
                    expected: schema.len(),
                    found: row.len(),
                });
            }
            for (col, cell) in schema.iter().zip(row) {
                if col.kind == ColumnKind::Numerical {
                    match cell {
                        Cell::Number(v) if v.is_finite() => {}
                        Cell::Missing => {}
                        Cell::Number(v) => {
                            return Err(Error::NonNumeric {
                                row: i + 1,
                                column: col.name.clone(),
                                token: v.to_string(),
                            })
                        }
                        Cell::Text(t) => {
                            return Err(Error::NonNumeric {
                                row: i + 1,
                                column: col.name.clone(),
                                token: t.clone(),
                            })
                        }
                    }
                }
            }
        }
        Ok(RawTable { schema, rows })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn candidate_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|c| c.role == ColumnRole::Candidate)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn target_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|c| c.role == ColumnRole::Target)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Re-interpret the table under `schema` (matched by name, column order
    /// kept). Text cells in columns newly marked numerical are parsed.
    pub fn with_schema(mut self, schema: Vec<ColumnSchema>) -> Result<Self> {
        check_unique_names(&schema)?;
        if schema.len() != self.schema.len() {
            return Err(Error::SchemaMismatch {
                detail: format!(
                    "table has {} columns, schema has {}",
                    self.schema.len(),
                    schema.len()
                ),
            });
        }
        let mut reordered = Vec::with_capacity(schema.len());
        for col in &self.schema {
            let entry = schema
                .iter()
                .find(|c| c.name == col.name)
                .ok_or_else(|| Error::SchemaMismatch {
                    detail: format!("column {:?} missing from schema", col.name),
                })?;
            reordered.push(entry.clone());
        }
        for (ci, col) in reordered.iter().enumerate() {
            if col.kind != ColumnKind::Numerical {
                continue;
            }
            for (ri, row) in self.rows.iter_mut().enumerate() {
                if let Cell::Text(token) = &row[ci] {
                    match parse_number(token) {
                        Some(v) => row[ci] = Cell::Number(v),
                        None => {
                            return Err(Error::NonNumeric {
                                row: ri + 1,
                                column: col.name.clone(),
                                token: token.clone(),
                            })
                        }
                    }
                }
            }
        }
        self.schema = reordered;
        Ok(self)
    }

    /// Append a numerical candidate column. Fails on name collision.
    pub fn push_numeric_column(&mut self, name: &str, values: &[f64]) -> Result<()> {
        if self.column_index(name).is_some() {
            return Err(Error::DuplicateColumn {
                name: name.to_string(),
            });
        }
        if values.len() != self.rows.len() {
            return Err(Error::Shape {
                context: "push_numeric_column",
                detail: format!("{} values for {} rows", values.len(), self.rows.len()),
            });
        }
        self.schema.push(ColumnSchema::new(
            name,
            ColumnKind::Numerical,
            ColumnRole::Candidate,
        ));
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(Cell::Number(*v));
        }
        Ok(())
    }

    /// Drop the named candidate columns (used to shrink the replica for
    /// small exhaustive-search benchmarks). Target columns cannot be dropped.
    pub fn drop_candidate_columns(&mut self, names: &[String]) -> Result<()> {
        for name in names {
            let idx = self
                .column_index(name)
                .ok_or_else(|| Error::UnknownColumn { name: name.clone() })?;
            if self.schema[idx].role == ColumnRole::Target {
                return Err(Error::InvalidConfig(format!(
                    "cannot drop target column {name:?}"
                )));
            }
            self.schema.remove(idx);
            for row in &mut self.rows {
                row.remove(idx);
            }
        }
        Ok(())
    }
}

fn check_unique_names(schema: &[ColumnSchema]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for col in schema {
        if !seen.insert(col.name.as_str()) {
            return Err(Error::DuplicateColumn {
                name: col.name.clone(),
            });
        }
    }
    Ok(())
}

fn check_roles(schema: &[ColumnSchema]) -> Result<()> {
    if !schema.iter().any(|c| c.role == ColumnRole::Candidate) {
        return Err(Error::MissingRole { role: "candidate" });
    }
    if !schema.iter().any(|c| c.role == ColumnRole::Target) {
        return Err(Error::MissingRole { role: "target" });
    }
    for col in schema {
        if col.role == ColumnRole::Target && col.kind != ColumnKind::Numerical {
            return Err(Error::CategoricalTarget {
                name: col.name.clone(),
            });
        }
    }
    Ok(())
}

/// Load a CSV file (first row header, empty field = missing).
///
/// With a schema, header names must match it exactly (order-insensitive)
/// and cells are parsed per the schema's column kinds. Without one, each
/// column is provisionally typed numerical iff every non-missing token
/// parses as a finite real, and all roles default to candidate; call
/// [`infer_schema`] afterwards to assign targets.
pub fn load_table(path: &Path, schema: Option<&[ColumnSchema]>) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if header.is_empty() {
        return Err(Error::EmptyTable);
    }

    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row: Vec<String> = record.iter().map(|f| f.to_string()).collect();
        if row.len() != header.len() {
            return Err(Error::RowArity {
                row: i + 1,
                expected: header.len(),
                found: row.len(),
            });
        }
        records.push(row);
    }
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }

    let schema = match schema {
        Some(given) => {
            let mut ordered = Vec::with_capacity(header.len());
            for name in &header {
                let col = given.iter().find(|c| &c.name == name).ok_or_else(|| {
                    Error::HeaderMismatch {
                        detail: format!("header column {name:?} not present in schema"),
                    }
                })?;
                ordered.push(col.clone());
            }
            if given.len() != header.len() {
                return Err(Error::HeaderMismatch {
                    detail: format!(
                        "schema has {} columns, header has {}",
                        given.len(),
                        header.len()
                    ),
                });
            }
            ordered
        }
        None => infer_column_kinds(&header, &records),
    };

    let mut rows = Vec::with_capacity(records.len());
    for (ri, record) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(record.len());
        for (ci, token) in record.iter().enumerate() {
            let cell = if token.is_empty() {
                Cell::Missing
            } else {
                match schema[ci].kind {
                    ColumnKind::Numerical => match parse_number(token) {
                        Some(v) => Cell::Number(v),
                        None => {
                            return Err(Error::NonNumeric {
                                row: ri + 1,
                                column: schema[ci].name.clone(),
                                token: token.clone(),
                            })
                        }
                    },
                    ColumnKind::Categorical => Cell::Text(token.clone()),
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }

    RawTable::new(schema, rows)
}

/// Write a table as CSV in the format `load_table` reads back: a header
/// row of column names, empty fields for missing cells. Numbers use the
/// shortest representation that parses back to the identical value.
pub fn write_csv(table: &RawTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    writer.write_record(table.schema().iter().map(|c| c.name.as_str()))?;
    let mut record = csv::StringRecord::new();
    for row in table.rows() {
        record.clear();
        for cell in row {
            match cell {
                Cell::Text(t) => record.push_field(t),
                Cell::Number(v) => record.push_field(&format!("{v}")),
                Cell::Missing => record.push_field(""),
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn infer_column_kinds(header: &[String], records: &[Vec<String>]) -> Vec<ColumnSchema> {
    header
        .iter()
        .enumerate()
        .map(|(ci, name)| {
            let numerical = records
                .iter()
                .all(|r| r[ci].is_empty() || parse_number(&r[ci]).is_some());
            ColumnSchema::new(
                name.clone(),
                if numerical {
                    ColumnKind::Numerical
                } else {
                    ColumnKind::Categorical
                },
                ColumnRole::Candidate,
            )
        })
        .collect()
}

/// Infer a full schema from cell contents: a column is numerical iff every
/// non-missing cell parses as a finite real; roles come from `target_names`.
pub fn infer_schema(table: &RawTable, target_names: &[String]) -> Result<Vec<ColumnSchema>> {
    if target_names.is_empty() {
        return Err(Error::MissingRole { role: "target" });
    }
    for name in target_names {
        if table.column_index(name).is_none() {
            return Err(Error::TargetNotFound { name: name.clone() });
        }
    }
    let mut schema = Vec::with_capacity(table.schema.len());
    for (ci, col) in table.schema.iter().enumerate() {
        let numerical = table.rows.iter().all(|row| match &row[ci] {
            Cell::Number(v) => v.is_finite(),
            Cell::Text(t) => parse_number(t).is_some(),
            Cell::Missing => true,
        });
        let is_target = target_names.iter().any(|t| t == &col.name);
        if is_target && !numerical {
            return Err(Error::CategoricalTarget {
                name: col.name.clone(),
            });
        }
        schema.push(ColumnSchema::new(
            col.name.clone(),
            if numerical {
                ColumnKind::Numerical
            } else {
                ColumnKind::Categorical
            },
            if is_target {
                ColumnRole::Target
            } else {
                ColumnRole::Candidate
            },
        ));
    }
    Ok(schema)
}

/// Fitted state of one candidate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Sorted category tokens; code of a token is its index + 1.
    pub categories: Option<Vec<String>>,
    pub min: f64,
    pub max: f64,
}

impl FittedColumn {
    fn code_of(&self, token: &str) -> Option<f64> {
        self.categories
            .as_ref()
            .and_then(|cats| cats.binary_search_by(|c| c.as_str().cmp(token)).ok())
            .map(|idx| (idx + 1) as f64)
    }

    fn scale(&self, value: f64, clip: bool) -> f64 {
        if self.max == self.min {
            return 0.5;
        }
        let scaled = (value - self.min) / (self.max - self.min);
        if clip {
            scaled.clamp(0.0, 1.0)
        } else {
            scaled
        }
    }
}

/// Everything needed to replay the fitted encoding on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorState {
    pub columns: Vec<FittedColumn>,
    pub target_names: Vec<String>,
}

/// Encoded design matrix: candidates in `[0, 1]`, targets unscaled.
#[derive(Debug, Clone)]
pub struct EncodedMatrix {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub candidate_names: Vec<String>,
    pub target_names: Vec<String>,
    pub preprocessor: PreprocessorState,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_candidates(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.y.ncols()
    }

    pub fn candidate_index(&self, name: &str) -> Option<usize> {
        self.candidate_names.iter().position(|n| n == name)
    }

    /// Copy of this matrix restricted to a single target column.
    pub fn with_single_target(&self, target: usize) -> EncodedMatrix {
        EncodedMatrix {
            x: self.x.clone(),
            y: self.y.column(target).to_owned().insert_axis(ndarray::Axis(1)),
            candidate_names: self.candidate_names.clone(),
            target_names: vec![self.target_names[target].clone()],
            preprocessor: self.preprocessor.clone(),
        }
    }
}

/// Fit the encoder on `table` and encode it.
///
/// Categories are coded `1..=K` in lexicographic token order, then every
/// candidate column is minmax-scaled; constant columns map to 0.5.
pub fn fit_encode(table: &RawTable) -> Result<EncodedMatrix> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    check_roles(table.schema())?;

    let mut columns = Vec::new();
    for (ci, col) in table.schema.iter().enumerate() {
        if col.role != ColumnRole::Candidate {
            continue;
        }
        reject_missing(table, ci)?;
        let fitted = match col.kind {
            ColumnKind::Categorical => {
                let mut cats = BTreeSet::new();
                for row in &table.rows {
                    if let Cell::Text(t) = &row[ci] {
                        cats.insert(t.clone());
                    }
                }
                let categories: Vec<String> = cats.into_iter().collect();
                let k = categories.len() as f64;
                FittedColumn {
                    name: col.name.clone(),
                    kind: col.kind,
                    categories: Some(categories),
                    min: 1.0,
                    max: k,
                }
            }
            ColumnKind::Numerical => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for row in &table.rows {
                    if let Cell::Number(v) = &row[ci] {
                        min = min.min(*v);
                        max = max.max(*v);
                    }
                }
                FittedColumn {
                    name: col.name.clone(),
                    kind: col.kind,
                    categories: None,
                    min,
                    max,
                }
            }
        };
        columns.push(fitted);
    }

    let state = PreprocessorState {
        columns,
        target_names: table.target_names(),
    };
    encode_with_state(&state, table, false)
}

/// Re-encode `table` with a previously fitted state.
///
/// Numeric values outside the fitted range are clipped into `[0, 1]`;
/// categories unseen at fit time are an error.
pub fn apply_preprocessor(state: &PreprocessorState, table: &RawTable) -> Result<EncodedMatrix> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    for fitted in &state.columns {
        let idx = table
            .column_index(&fitted.name)
            .ok_or_else(|| Error::SchemaMismatch {
                detail: format!("fitted column {:?} missing from table", fitted.name),
            })?;
        let col = &table.schema[idx];
        if col.kind != fitted.kind || col.role != ColumnRole::Candidate {
            return Err(Error::SchemaMismatch {
                detail: format!("column {:?} differs from the fitted schema", fitted.name),
            });
        }
    }
    for target in &state.target_names {
        if table.column_index(target).is_none() {
            return Err(Error::SchemaMismatch {
                detail: format!("fitted target {target:?} missing from table"),
            });
        }
    }
    encode_with_state(state, table, true)
}

fn reject_missing(table: &RawTable, ci: usize) -> Result<()> {
    for (ri, row) in table.rows.iter().enumerate() {
        if row[ci].is_missing() {
            return Err(Error::MissingValue {
                row: ri + 1,
                column: table.schema[ci].name.clone(),
            });
        }
    }
    Ok(())
}

fn encode_with_state(
    state: &PreprocessorState,
    table: &RawTable,
    clip: bool,
) -> Result<EncodedMatrix> {
    let n = table.n_rows();
    let d = state.columns.len();
    let q = state.target_names.len();

    let mut x = Array2::zeros((n, d));
    for (j, fitted) in state.columns.iter().enumerate() {
        let ci = table.column_index(&fitted.name).expect("checked above");
        reject_missing(table, ci)?;
        for (ri, row) in table.rows.iter().enumerate() {
            let raw = match (&row[ci], fitted.kind) {
                (Cell::Number(v), ColumnKind::Numerical) => *v,
                (Cell::Text(t), ColumnKind::Categorical) => {
                    fitted.code_of(t).ok_or_else(|| Error::UnseenCategory {
                        column: fitted.name.clone(),
                        token: t.clone(),
                    })?
                }
                (cell, _) => {
                    return Err(Error::SchemaMismatch {
                        detail: format!(
                            "column {:?}, row {}: cell {:?} does not match fitted kind",
                            fitted.name,
                            ri + 1,
                            cell
                        ),
                    })
                }
            };
            x[[ri, j]] = fitted.scale(raw, clip);
        }
    }

    let mut y = Array2::zeros((n, q));
    for (j, target) in state.target_names.iter().enumerate() {
        let ci = table
            .column_index(target)
            .ok_or_else(|| Error::TargetNotFound {
                name: target.clone(),
            })?;
        for (ri, row) in table.rows.iter().enumerate() {
            match &row[ci] {
                Cell::Number(v) if v.is_finite() => y[[ri, j]] = *v,
                Cell::Missing => {
                    return Err(Error::MissingValue {
                        row: ri + 1,
                        column: target.clone(),
                    })
                }
                other => {
                    return Err(Error::NonNumeric {
                        row: ri + 1,
                        column: target.clone(),
                        token: format!("{other:?}"),
                    })
                }
            }
        }
    }

    Ok(EncodedMatrix {
        x,
        y,
        candidate_names: state.columns.iter().map(|c| c.name.clone()).collect(),
        target_names: state.target_names.clone(),
        preprocessor: state.clone(),
    })
}

/// Read a schema sidecar: a JSON array of `{name, kind, role}`.
pub fn load_schema_sidecar(path: &Path) -> Result<Vec<ColumnSchema>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema: Vec<ColumnSchema> =
        serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch {
            detail: format!("cannot parse schema sidecar: {e}"),
        })?;
    check_unique_names(&schema)?;
    Ok(schema)
}
