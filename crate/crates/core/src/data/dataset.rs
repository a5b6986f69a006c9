use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category values; empty for numeric columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

/// One cell of a record. Categorical cells hold an index into the column's
/// category list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(u32),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            Cell::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match *self {
            Cell::Cat(v) => Some(v),
            Cell::Num(_) => None,
        }
    }
}

/// Column-kind overrides keyed by column name.
pub type SchemaHint = BTreeMap<String, ColumnKind>;

/// A schema-typed tabular dataset with a designated label column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    columns: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
    label_column: usize,
    n_classes: usize,
    /// Rows discarded at load time because they contained empty cells.
    #[serde(default)]
    dropped_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub rows: usize,
    pub features: usize,
    pub labels: usize,
    pub label_column: String,
    pub dropped_rows: usize,
    pub columns: Vec<ColumnSchema>,
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} rows, {} features, {} labels",
            self.rows, self.features, self.labels
        )
    }
}

impl Dataset {
    /// Build a dataset from typed rows, checking every invariant.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<ColumnSchema>,
        rows: Vec<Vec<Cell>>,
        label_column: usize,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if label_column >= columns.len() {
            return Err(Error::InvalidDataset(format!(
                "label column index {label_column} out of range"
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "column {:?} appears twice",
                    c.name
                )));
            }
        }
        let label = &columns[label_column];
        if label.kind != ColumnKind::Categorical || label.categories.is_empty() {
            return Err(Error::InvalidDataset(
                "label column must be categorical with at least one class".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {} cells, found {}", columns.len(), row.len()),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                let ok = match (cell, col.kind) {
                    (Cell::Num(v), ColumnKind::Numeric) => v.is_finite(),
                    (Cell::Cat(k), ColumnKind::Categorical) => (*k as usize) < col.categories.len(),
                    _ => false,
                };
                if !ok {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("cell {cell:?} does not conform to column {:?}", col.name),
                    });
                }
            }
        }
        let n_classes = label.categories.len();
        Ok(Self {
            name: name.into(),
            columns,
            rows,
            label_column,
            n_classes,
            dropped_rows: 0,
        })
    }

    /// Build a dataset from textual records, inferring column kinds.
    ///
    /// A column is numeric when every cell parses as a finite number, unless
    /// `hints` says otherwise. The label column is always categorical. Rows
    /// with an empty cell are dropped and counted.
    pub fn from_text_records(
        name: impl Into<String>,
        header: &[String],
        records: Vec<Vec<String>>,
        hints: &SchemaHint,
        label: &str,
    ) -> Result<Self> {
        let width = header.len();
        let label_column = header
            .iter()
            .position(|h| h == label)
            .ok_or_else(|| Error::InvalidDataset(format!("label column {label:?} not found")))?;
        for hint in hints.keys() {
            if !header.contains(hint) {
                return Err(Error::InvalidDataset(format!(
                    "schema hint names unknown column {hint:?}"
                )));
            }
        }

        let mut kept = Vec::with_capacity(records.len());
        let mut dropped = 0usize;
        for (i, rec) in records.into_iter().enumerate() {
            if rec.len() != width {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {width} cells, found {}", rec.len()),
                });
            }
            if rec.iter().any(|c| c.trim().is_empty()) {
                dropped += 1;
                continue;
            }
            kept.push((i + 1, rec));
        }
        if kept.is_empty() {
            return Err(Error::InvalidDataset("no complete rows".into()));
        }

        let mut columns = Vec::with_capacity(width);
        for (j, col_name) in header.iter().enumerate() {
            let all_numeric = kept
                .iter()
                .all(|(_, r)| r[j].trim().parse::<f64>().map_or(false, f64::is_finite));
            let kind = if j == label_column {
                ColumnKind::Categorical
            } else {
                match hints.get(col_name) {
                    Some(k) => *k,
                    None if all_numeric => ColumnKind::Numeric,
                    None => ColumnKind::Categorical,
                }
            };
            let categories = match kind {
                ColumnKind::Numeric => Vec::new(),
                ColumnKind::Categorical => {
                    ordered_categories(kept.iter().map(|(_, r)| r[j].trim()))
                }
            };
            columns.push(ColumnSchema {
                name: col_name.clone(),
                kind,
                categories,
            });
        }

        let lookup: Vec<HashMap<&str, u32>> = columns
            .iter()
            .map(|c| {
                c.categories
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (v.as_str(), k as u32))
                    .collect()
            })
            .collect();
        let mut rows = Vec::with_capacity(kept.len());
        for (row_no, rec) in &kept {
            let mut row = Vec::with_capacity(width);
            for (j, raw) in rec.iter().enumerate() {
                let raw = raw.trim();
                let cell = match columns[j].kind {
                    ColumnKind::Numeric => {
                        let v: f64 = raw.parse().map_err(|_| Error::Parse {
                            row: *row_no,
                            message: format!(
                                "column {:?}: cannot parse {raw:?} as a number",
                                columns[j].name
                            ),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                row: *row_no,
                                message: format!("column {:?}: non-finite value", columns[j].name),
                            });
                        }
                        Cell::Num(v)
                    }
                    ColumnKind::Categorical => Cell::Cat(lookup[j][raw]),
                };
                row.push(cell);
            }
            rows.push(row);
        }
        let mut ds = Dataset::new(name, columns, rows, label_column)?;
        ds.dropped_rows = dropped;
        Ok(ds)
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_column(&self) -> usize {
        self.label_column
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn label(&self, i: usize) -> usize {
        match self.rows[i][self.label_column] {
            Cell::Cat(k) => k as usize,
            Cell::Num(_) => unreachable!("label column is categorical"),
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Canonical text of a cell, as it would appear in a CSV file.
    pub fn cell_text(&self, row: usize, col: usize) -> String {
        match self.rows[row][col] {
            Cell::Num(v) => format_number(v),
            Cell::Cat(k) => self.columns[col].categories[k as usize].clone(),
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            name: self.name.clone(),
            rows: self.len(),
            features: self.n_features(),
            labels: self.n_classes,
            label_column: self.columns[self.label_column].name.clone(),
            dropped_rows: self.dropped_rows,
            columns: self.columns.clone(),
        }
    }

    /// Replace one row; used to inject synthetic records.
    pub fn set_row(&mut self, i: usize, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::SchemaMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        self.rows[i] = row;
        Ok(())
    }

    /// Append a category to a categorical column and return its index.
    pub fn add_category(&mut self, col: usize, value: impl Into<String>) -> Result<u32> {
        let column = &mut self.columns[col];
        if column.kind != ColumnKind::Categorical || col == self.label_column {
            return Err(Error::InvalidDataset(format!(
                "column {:?} cannot take new categories",
                column.name
            )));
        }
        let value = value.into();
        if let Some(k) = column.categories.iter().position(|c| *c == value) {
            return Ok(k as u32);
        }
        column.categories.push(value);
        Ok(column.categories.len() as u32 - 1)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.len() {
            w.write_record((0..self.columns.len()).map(|j| self.cell_text(i, j)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Distinct values, numerically ordered when every value is a number.
fn ordered_categories<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.collect();
    let mut out: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
    let numeric: Option<Vec<f64>> = out.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(out).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out = paired.into_iter().map(|(_, s)| s).collect();
    }
    out
}

pub(crate) fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Read a CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, hints: &SchemaHint, label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    load_csv_reader(file, name, hints, label)
}

pub fn load_csv_reader<R: Read>(
    reader: R,
    name: impl Into<String>,
    hints: &SchemaHint,
    label: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::InvalidDataset("empty file or missing header".into()));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(Error::InvalidDataset("file has a header but no rows".into()));
    }
    Dataset::from_text_records(name, &header, records, hints, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, label: &str) -> Result<Dataset> {
        load_csv_reader(text.as_bytes(), "t", &SchemaHint::new(), label)
    }

    #[test]
    fn three_row_numeric_file() {
        let ds = load("a,b,y\n1,2,0\n3,4,1\n5,6,0\n", "y").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.columns()[0].kind, ColumnKind::Numeric);
        assert_eq!(ds.labels(), vec![0, 1, 0]);
    }

    #[test]
    fn ragged_row_is_named() {
        let err = load("a,b,y\n1,2,0\n3,4\n", "y").unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_label_column() {
        assert!(matches!(
            load("a,b\n1,2\n", "y"),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn numeric_hint_on_text_cell_reports_row() {
        let mut hints = SchemaHint::new();
        hints.insert("a".into(), ColumnKind::Numeric);
        let err = load_csv_reader("a,y\n1,0\nx,1\n".as_bytes(), "t", &hints, "y").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn empty_cells_drop_rows() {
        let ds = load("a,b,y\n1,,0\n3,4,1\n5,6,0\n", "y").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped_rows(), 1);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(load("", "y").is_err());
        assert!(load("a,y\n", "y").is_err());
    }

    #[test]
    fn quoted_fields_and_category_order() {
        let ds = load("city,y\n\"New York, NY\",10\nParis,2\nParis,10\n", "y").unwrap();
        assert_eq!(ds.columns()[0].categories, vec!["New York, NY", "Paris"]);
        // numeric-looking labels sort numerically, not lexically
        assert_eq!(ds.columns()[1].categories, vec!["2", "10"]);
        assert_eq!(ds.labels(), vec![1, 0, 1]);
    }

    #[test]
    fn csv_round_trip_preserves_cells() {
        let ds = load("a,c,y\n1.5,x,0\n-2,y,1\n0,x,1\n", "y").unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = load(std::str::from_utf8(&buf).unwrap(), "y").unwrap();
        assert_eq!(back.rows(), ds.rows());
        assert_eq!(back.columns(), ds.columns());
    }
}
