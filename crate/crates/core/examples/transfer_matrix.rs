//! How well do attacks transfer when the adversary guesses the wrong
//! architecture? Each target is attacked with every surrogate.

use tabmia::attacks::{run_transfer_matrix, AttackFamily, AttackSpec, TransferTarget};
use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::eval::roc_auc;
use tabmia::models::ModelKind;

fn main() -> tabmia::Result<()> {
    let ds = membership_benchmark(800, 9)?;
    let part = make_partition(&ds, 9)?;
    let kinds = [ModelKind::NaiveBayes, ModelKind::DecisionTree, ModelKind::GradientBoostedTrees];
    let targets: Vec<TransferTarget> = kinds.iter().map(|&k| TransferTarget::new(k)).collect();
    let attacks = [
        AttackSpec::new(AttackFamily::RmiaOffline).with_references(16),
        AttackSpec::new(AttackFamily::ShadowProbabilities),
    ];
    let m = run_transfer_matrix(&ds, &part, &attacks, &targets, &kinds, 9, 1500)?;

    for family in &m.families {
        println!("{family} (rows: target, columns: surrogate)");
        print!("{:>24}", "");
        for s in &m.surrogates {
            print!("{:>24}", s.as_str());
        }
        println!();
        for t in &m.targets {
            print!("{:>24}", t.as_str());
            for s in &m.surrogates {
                let cell = m.cell(*family, *t, *s).expect("full matrix");
                match &cell.result {
                    Some(r) => print!("{:>24.3}", roc_auc(r)?.1),
                    None => print!("{:>24}", "failed"),
                }
            }
            println!();
        }
    }
    Ok(())
}
