//! Deterministic synthetic tabular data for demos and acceptance checks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Cell, ColumnSchema, Dataset};
use crate::error::Result;
use crate::seed;

pub const REGIONS: [&str; 6] = ["north", "south", "east", "west", "centre", "coast"];
pub const AGE_BANDS: [&str; 5] = ["18-29", "30-39", "40-49", "50-64", "65+"];

/// Quasi-identifier column names of [`membership_benchmark`].
pub const BENCHMARK_QIS: [&str; 3] = ["sex", "region", "age_band"];

/// A binary task with six numeric features, three categorical
/// quasi-identifiers and label noise.
///
/// The label follows a linear rule plus Gaussian noise, so linear and
/// Bayesian models generalize well while high-capacity trees memorize the
/// noise and overfit.
pub fn membership_benchmark(n_rows: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut columns: Vec<ColumnSchema> = (1..=6)
        .map(|k| ColumnSchema::numeric(format!("x{k}")))
        .collect();
    columns.push(ColumnSchema::categorical("sex", ["F", "M"]));
    columns.push(ColumnSchema::categorical("region", REGIONS));
    columns.push(ColumnSchema::categorical("age_band", AGE_BANDS));
    columns.push(ColumnSchema::categorical("y", ["0", "1"]));

    let rows = (0..n_rows)
        .map(|_| {
            let x: Vec<f64> = (0..6).map(|_| round3(normal.sample(&mut rng))).collect();
            let sex = rng.gen_range(0..2u32);
            let region = rng.gen_range(0..REGIONS.len() as u32);
            let age = rng.gen_range(0..AGE_BANDS.len() as u32);
            let signal = x[0] - 0.8 * x[1] + 0.5 * x[2] + 0.3 * (f64::from(sex) - 0.5);
            let noisy = signal + 1.2 * normal.sample(&mut rng);
            let y = u32::from(noisy > 0.0);
            let mut row: Vec<Cell> = x.into_iter().map(Cell::Num).collect();
            row.extend([Cell::Cat(sex), Cell::Cat(region), Cell::Cat(age), Cell::Cat(y)]);
            row
        })
        .collect();
    Dataset::new("membership-benchmark", columns, rows, 9)
}

/// Turn `rows` of a [`membership_benchmark`] dataset into single-outs: each
/// gets a fresh region value (unique quasi-identifier tuple), far-out numeric
/// features, and a label that contradicts the linear rule.
pub fn inject_single_outs(ds: &mut Dataset, rows: &[usize], seed: u64) -> Result<()> {
    let mut rng = seed::rng(seed);
    let region_col = ds.column_index("region").expect("benchmark layout");
    for (k, &i) in rows.iter().enumerate() {
        let region = ds.add_category(region_col, format!("enclave-{k}"))?;
        let mut row = ds.row(i).to_vec();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for (j, cell) in row.iter_mut().take(6).enumerate() {
            let spread = 4.0 + rng.gen_range(0.0..2.0);
            *cell = Cell::Num(round3(if j % 2 == 0 { sign * spread } else { -sign * spread }));
        }
        row[region_col] = Cell::Cat(region);
        // x1 - 0.8 x2 + 0.5 x3 has the sign of `sign`; give the opposite label.
        row[9] = Cell::Cat(u32::from(sign < 0.0));
        ds.set_row(i, row)?;
    }
    Ok(())
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{detect_single_outs, QuasiIdentifierSet};

    #[test]
    fn benchmark_is_deterministic_and_balanced_enough() {
        let a = membership_benchmark(200, 1).unwrap();
        let b = membership_benchmark(200, 1).unwrap();
        assert_eq!(a.rows(), b.rows());
        let ones = a.labels().iter().filter(|&&y| y == 1).count();
        assert!(ones > 60 && ones < 140, "{ones}");
    }

    #[test]
    fn injected_rows_become_single_outs() {
        let mut d = membership_benchmark(300, 2).unwrap();
        let q = QuasiIdentifierSet::from_names(&d, &BENCHMARK_QIS).unwrap();
        let before = detect_single_outs(&d, &q).single_out_indices;
        inject_single_outs(&mut d, &[5, 17, 40, 41, 99], 3).unwrap();
        let after = detect_single_outs(&d, &q).single_out_indices;
        for i in [5, 17, 40, 41, 99] {
            assert!(after.contains(&i));
        }
        // each moved row may leave one former partner alone in its old class
        assert!(after.len() <= before.len() + 10);
    }
}
