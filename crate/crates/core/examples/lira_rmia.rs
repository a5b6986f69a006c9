//! Reference-model attacks: LiRA and RMIA, online and offline, sharing one
//! cached reference pool per mode.

use std::time::Instant;

use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackSpec};
use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::eval::{roc_auc, tpr_at_fpr};
use tabmia::models::{train_model, ModelKind, ModelSpec};

fn main() -> tabmia::Result<()> {
    let ds = membership_benchmark(1000, 6)?;
    let part = make_partition(&ds, 1)?;
    let spec = ModelSpec::new(ModelKind::DecisionTree).with_seed(1);
    let target = train_model(&ds, &part.target_train, &spec)?;
    let mut ctx = AttackContext::new(&ds, &part, &target, spec, 2500, 1)?;

    for family in [
        AttackFamily::LiraOnline,
        AttackFamily::RmiaOnline,
        AttackFamily::LiraOffline,
        AttackFamily::RmiaOffline,
    ] {
        let t = Instant::now();
        let res = run_attack(&mut ctx, &AttackSpec::new(family).with_references(32).with_seed(1))?;
        println!(
            "{family:<13} auc {:.3}  tpr@1%fpr {:.3}  ({:.2}s)",
            roc_auc(&res)?.1,
            tpr_at_fpr(&res.scores, &res.truth, 0.01)?,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
