//! Load the bundled CSV, print its schema, and carve it into the disjoint
//! population / target-train / target-test splits plus the balanced
//! inference set.
//!
//! ```text
//! cargo run --example ingest_and_partition
//! ```

use std::path::Path;

use tabmia::data::{load_csv, make_partition, ColumnKind, SchemaHint};

fn main() -> tabmia::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_600.csv");
    // `y` holds 0/1; force it categorical so it is not read as a number.
    let hint = SchemaHint::from([("y".to_string(), ColumnKind::Categorical)]);
    let ds = load_csv(&path, &hint, "y")?;
    println!("{}", ds.summary());
    for c in ds.columns() {
        println!("  {:<10} {:?} {:?}", c.name, c.kind, c.categories);
    }

    let part = make_partition(&ds, 42)?;
    println!(
        "population {} | target train {} | target test {} | inference {} + {}",
        part.population.len(),
        part.target_train.len(),
        part.target_test.len(),
        part.inference_members.len(),
        part.inference_nonmembers.len()
    );
    let again = make_partition(&ds, 42)?;
    assert_eq!(part, again);
    println!("same seed, same partition");
    Ok(())
}
