use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Columns whose combined values may single out an individual.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiIdentifierSet {
    qi_columns: Vec<usize>,
}

impl QuasiIdentifierSet {
    pub fn new(ds: &Dataset, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::QuasiIdentifier("empty quasi-identifier set".into()));
        }
        let mut cols = columns.to_vec();
        cols.sort_unstable();
        cols.dedup();
        for &c in &cols {
            if c >= ds.columns().len() {
                return Err(Error::QuasiIdentifier(format!("column {c} out of range")));
            }
            if c == ds.label_column() {
                return Err(Error::QuasiIdentifier(
                    "the label column cannot be a quasi-identifier".into(),
                ));
            }
        }
        Ok(Self { qi_columns: cols })
    }

    pub fn from_names<S: AsRef<str>>(ds: &Dataset, names: &[S]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| {
                ds.column_index(n.as_ref()).ok_or_else(|| {
                    Error::QuasiIdentifier(format!("unknown column {:?}", n.as_ref()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ds, &cols)
    }

    pub fn columns(&self) -> &[usize] {
        &self.qi_columns
    }
}

/// One equivalence class: a quasi-identifier value tuple and its frequency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceClass {
    pub values: Vec<String>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleOutReport {
    pub qi_columns: Vec<String>,
    /// Equivalence classes ordered by their value tuple.
    pub equivalence_classes: Vec<EquivalenceClass>,
    /// Rows whose class has frequency one, ascending.
    pub single_out_indices: Vec<usize>,
}

impl SingleOutReport {
    pub fn n_single_outs(&self) -> usize {
        self.single_out_indices.len()
    }

    pub fn is_single_out(&self, row: usize) -> bool {
        self.single_out_indices.binary_search(&row).is_ok()
    }
}

/// Group rows by exact equality of their quasi-identifier tuples and report
/// every row whose class has frequency one.
pub fn detect_single_outs(ds: &Dataset, q: &QuasiIdentifierSet) -> SingleOutReport {
    let mut classes: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        let key = q.columns().iter().map(|&c| ds.cell_text(i, c)).collect();
        classes.entry(key).or_default().push(i);
    }
    let mut singles: Vec<usize> = classes
        .values()
        .filter(|rows| rows.len() == 1)
        .map(|rows| rows[0])
        .collect();
    singles.sort_unstable();
    SingleOutReport {
        qi_columns: q
            .columns()
            .iter()
            .map(|&c| ds.columns()[c].name.clone())
            .collect(),
        equivalence_classes: classes
            .into_iter()
            .map(|(values, rows)| EquivalenceClass {
                values,
                count: rows.len(),
            })
            .collect(),
        single_out_indices: singles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, ColumnSchema};

    fn ds(rows: Vec<(u32, f64)>) -> Dataset {
        Dataset::new(
            "qi",
            vec![
                ColumnSchema::categorical("g", ["A", "B"]),
                ColumnSchema::numeric("n"),
                ColumnSchema::categorical("y", ["0"]),
            ],
            rows.into_iter()
                .map(|(g, n)| vec![Cell::Cat(g), Cell::Num(n), Cell::Cat(0)])
                .collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn counts_and_singletons() {
        let d = ds(vec![(0, 1.0), (0, 1.0), (1, 2.0)]);
        let q = QuasiIdentifierSet::new(&d, &[0, 1]).unwrap();
        let r = detect_single_outs(&d, &q);
        assert_eq!(r.equivalence_classes.len(), 2);
        assert_eq!(r.equivalence_classes[0].values, vec!["A", "1"]);
        assert_eq!(r.equivalence_classes[0].count, 2);
        assert_eq!(r.equivalence_classes[1].count, 1);
        assert_eq!(r.single_out_indices, vec![2]);
    }

    #[test]
    fn shared_tuple_has_no_single_outs() {
        let d = ds(vec![(1, 0.0); 5]);
        let q = QuasiIdentifierSet::new(&d, &[0]).unwrap();
        assert!(detect_single_outs(&d, &q).single_out_indices.is_empty());
    }

    #[test]
    fn invalid_sets_rejected() {
        let d = ds(vec![(0, 0.0)]);
        assert!(QuasiIdentifierSet::new(&d, &[]).is_err());
        assert!(QuasiIdentifierSet::new(&d, &[2]).is_err());
        assert!(QuasiIdentifierSet::new(&d, &[7]).is_err());
        assert!(QuasiIdentifierSet::from_names(&d, &["nope"]).is_err());
    }

    #[test]
    fn negative_zero_groups_with_zero() {
        let d = ds(vec![(0, 0.0), (0, -0.0)]);
        let q = QuasiIdentifierSet::new(&d, &[0, 1]).unwrap();
        assert!(detect_single_outs(&d, &q).single_out_indices.is_empty());
    }
}
