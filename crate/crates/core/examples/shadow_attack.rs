//! The classic shadow-model attack in both feature modes, with the target's
//! own architecture and with a mismatched surrogate.

use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackSpec};
use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::eval::{advantage, roc_auc};
use tabmia::models::{train_model, ModelKind, ModelSpec};

fn main() -> tabmia::Result<()> {
    let ds = membership_benchmark(1000, 4)?;
    let part = make_partition(&ds, 8)?;
    let spec = ModelSpec::new(ModelKind::RandomForest)
        .with("n_estimators", 50.0)
        .with_seed(8);
    let target = train_model(&ds, &part.target_train, &spec)?;
    let mut ctx = AttackContext::new(&ds, &part, &target, spec, 2500, 8)?;

    for family in [AttackFamily::ShadowPredictions, AttackFamily::ShadowProbabilities] {
        for surrogate in [None, Some(ModelKind::LogisticRegression)] {
            let mut attack = AttackSpec::new(family).with_seed(8);
            if let Some(kind) = surrogate {
                attack = attack.with_surrogate(kind);
            }
            let res = run_attack(&mut ctx, &attack)?;
            println!(
                "{family:<22} shadow {:<22} auc {:.3} advantage {:+.3}",
                attack.surrogate(ModelKind::RandomForest).as_str(),
                roc_auc(&res)?.1,
                advantage(&res)?
            );
        }
    }
    Ok(())
}
