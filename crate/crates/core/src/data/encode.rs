use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dataset::{Cell, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BlockEncoding {
    /// `(x - mean) / std`.
    Standardized { mean: f64, std: f64 },
    /// Constant column in the fitting rows; always encodes to 0.
    ZeroVariance,
    /// Indicator columns for the category indices seen while fitting.
    OneHot { categories: Vec<u32> },
}

/// Where one input column landed in the encoded matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub column: usize,
    pub range: Range<usize>,
    pub encoding: BlockEncoding,
}

impl FeatureBlock {
    pub fn is_one_hot(&self) -> bool {
        matches!(self.encoding, BlockEncoding::OneHot { .. })
    }
}

/// Fitted feature encoder: one-hot for categorical columns, standardization
/// for numeric ones. Statistics come from the rows passed to [`Encoder::fit`];
/// the same encoder is then reapplied to every other split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    n_columns: usize,
    label_column: usize,
    blocks: Vec<FeatureBlock>,
    width: usize,
    warnings: Vec<String>,
}

/// Encoded features plus labels and the column-expansion map.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub blocks: Vec<FeatureBlock>,
}

impl EncodedMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Build directly from numeric features; every column becomes its own
    /// numeric block.
    pub fn from_parts(x: Matrix, labels: Vec<usize>, n_classes: usize) -> Self {
        let blocks = (0..x.cols())
            .map(|j| FeatureBlock {
                column: j,
                range: j..j + 1,
                encoding: BlockEncoding::Standardized { mean: 0.0, std: 1.0 },
            })
            .collect();
        Self {
            x,
            labels,
            n_classes,
            blocks,
        }
    }

    pub fn select(&self, idx: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            blocks: self.blocks.clone(),
        }
    }
}

impl Encoder {
    pub fn fit(ds: &Dataset, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("cannot fit encoder on zero rows".into()));
        }
        let mut blocks = Vec::new();
        let mut warnings = Vec::new();
        let mut offset = 0;
        for (j, col) in ds.columns().iter().enumerate() {
            if j == ds.label_column() {
                continue;
            }
            let encoding = match col.kind {
                ColumnKind::Numeric => {
                    let n = rows.len() as f64;
                    let vals = rows.iter().map(|&i| ds.row(i)[j].as_num().unwrap_or(0.0));
                    let mean = vals.clone().sum::<f64>() / n;
                    let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let std = var.sqrt();
                    if std <= 1e-12 {
                        warnings.push(format!(
                            "column {:?} has zero variance; encoded as zeros",
                            col.name
                        ));
                        BlockEncoding::ZeroVariance
                    } else {
                        BlockEncoding::Standardized { mean, std }
                    }
                }
                ColumnKind::Categorical => {
                    let mut seen = vec![false; col.categories.len()];
                    for &i in rows {
                        if let Some(k) = ds.row(i)[j].as_cat() {
                            seen[k as usize] = true;
                        }
                    }
                    let categories = seen
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| **s)
                        .map(|(k, _)| k as u32)
                        .collect();
                    BlockEncoding::OneHot { categories }
                }
            };
            let width = match &encoding {
                BlockEncoding::OneHot { categories } => categories.len(),
                _ => 1,
            };
            blocks.push(FeatureBlock {
                column: j,
                range: offset..offset + width,
                encoding,
            });
            offset += width;
        }
        Ok(Self {
            n_columns: ds.columns().len(),
            label_column: ds.label_column(),
            blocks,
            width: offset,
            warnings,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Encode a full-width record (the label cell is ignored) into `out`.
    pub fn encode_row_into(&self, row: &[Cell], out: &mut [f64]) -> Result<()> {
        if row.len() != self.n_columns {
            return Err(Error::SchemaMismatch {
                expected: self.n_columns,
                actual: row.len(),
            });
        }
        debug_assert_eq!(out.len(), self.width);
        for b in &self.blocks {
            let cell = row[b.column];
            match (&b.encoding, cell) {
                (BlockEncoding::Standardized { mean, std }, Cell::Num(v)) => {
                    out[b.range.start] = (v - mean) / std;
                }
                (BlockEncoding::ZeroVariance, Cell::Num(_)) => out[b.range.start] = 0.0,
                (BlockEncoding::OneHot { categories }, Cell::Cat(k)) => {
                    out[b.range.clone()].fill(0.0);
                    if let Ok(pos) = categories.binary_search(&k) {
                        out[b.range.start + pos] = 1.0;
                    }
                }
                _ => {
                    return Err(Error::InvalidDataset(format!(
                        "cell {cell:?} has the wrong kind for column {}",
                        b.column
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn encode_row(&self, row: &[Cell]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width];
        self.encode_row_into(row, &mut out)?;
        Ok(out)
    }

    pub fn transform(&self, ds: &Dataset, rows: &[usize]) -> Result<EncodedMatrix> {
        let mut x = Matrix::zeros(rows.len(), self.width);
        for (r, &i) in rows.iter().enumerate() {
            self.encode_row_into(ds.row(i), x.row_mut(r))?;
        }
        Ok(EncodedMatrix {
            x,
            labels: rows.iter().map(|&i| ds.label(i)).collect(),
            n_classes: ds.n_classes(),
            blocks: self.blocks.clone(),
        })
    }

    /// Column of the source dataset that holds the label.
    pub fn label_column(&self) -> usize {
        self.label_column
    }
}

/// Fit an encoder on `rows` and encode those same rows.
pub fn encode_features(ds: &Dataset, rows: &[usize]) -> Result<(Encoder, EncodedMatrix)> {
    let enc = Encoder::fit(ds, rows)?;
    let m = enc.transform(ds, rows)?;
    Ok((enc, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSchema, Dataset};

    fn ds() -> Dataset {
        Dataset::new(
            "t",
            vec![
                ColumnSchema::numeric("n"),
                ColumnSchema::categorical("c", ["A", "B"]),
                ColumnSchema::numeric("k"),
                ColumnSchema::categorical("y", ["0", "1"]),
            ],
            vec![
                vec![Cell::Num(2.0), Cell::Cat(0), Cell::Num(5.0), Cell::Cat(0)],
                vec![Cell::Num(4.0), Cell::Cat(1), Cell::Num(5.0), Cell::Cat(1)],
                vec![Cell::Num(6.0), Cell::Cat(0), Cell::Num(5.0), Cell::Cat(1)],
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn standardizes_and_one_hot_expands() {
        let d = ds();
        let (enc, m) = encode_features(&d, &[0, 1, 2]).unwrap();
        assert_eq!(enc.width(), 4);
        let z = 1.224_744_871_391_589;
        assert!((m.x.get(0, 0) + z).abs() < 1e-12);
        assert!(m.x.get(1, 0).abs() < 1e-12);
        assert!((m.x.get(2, 0) - z).abs() < 1e-12);
        assert_eq!(&m.x.row(0)[1..3], &[1.0, 0.0]);
        assert_eq!(&m.x.row(1)[1..3], &[0.0, 1.0]);
        assert_eq!(m.labels, vec![0, 1, 1]);
    }

    #[test]
    fn constant_column_warns_and_zeroes() {
        let d = ds();
        let (enc, m) = encode_features(&d, &[0, 1, 2]).unwrap();
        assert_eq!(enc.warnings().len(), 1);
        assert!((0..3).all(|i| m.x.get(i, 3) == 0.0));
    }

    #[test]
    fn unseen_category_maps_to_zero_block() {
        let d = ds();
        // fit without any "B" rows
        let enc = Encoder::fit(&d, &[0, 2]).unwrap();
        assert_eq!(enc.width(), 3);
        let row = enc.encode_row(d.row(1)).unwrap();
        assert_eq!(row[1], 0.0);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let d = ds();
        let enc = Encoder::fit(&d, &[0, 1]).unwrap();
        assert!(matches!(
            enc.encode_row(&[Cell::Num(1.0)]),
            Err(Error::SchemaMismatch { expected: 4, actual: 1 })
        ));
    }
}
