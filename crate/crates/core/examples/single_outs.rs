//! Find records whose quasi-identifier tuple is unique in the dataset.

use tabmia::data::synthetic::{inject_single_outs, membership_benchmark, BENCHMARK_QIS};
use tabmia::data::{detect_single_outs, QuasiIdentifierSet};

fn main() -> tabmia::Result<()> {
    let mut ds = membership_benchmark(2000, 5)?;
    let qi = QuasiIdentifierSet::from_names(&ds, &BENCHMARK_QIS)?;

    let before = detect_single_outs(&ds, &qi);
    println!(
        "{} equivalence classes over {:?}, {} single-out(s)",
        before.equivalence_classes.len(),
        before.qi_columns,
        before.n_single_outs()
    );
    let smallest = before.equivalence_classes.iter().min_by_key(|c| c.count).unwrap();
    println!("smallest class: {:?} x{}", smallest.values, smallest.count);

    inject_single_outs(&mut ds, &[10, 250, 1999], 9)?;
    let after = detect_single_outs(&ds, &qi);
    println!("after injecting three outliers: {:?}", after.single_out_indices);
    Ok(())
}
