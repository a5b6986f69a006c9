//! ROC curve, AUC with a bootstrap interval, TPR at low FPR, and the full
//! metrics report for one attack.

use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackSpec};
use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::eval::{auc, evaluate, roc_curve, EvalOptions};
use tabmia::models::{train_model, ModelKind, ModelSpec};

fn main() -> tabmia::Result<()> {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.1];
    let truth = [true, true, false, true, false, true, false, false];
    let curve = roc_curve(&scores, &truth)?;
    for i in 0..curve.len() {
        println!("thr {:>5} fpr {:.2} tpr {:.2}", curve.thresholds[i], curve.fpr[i], curve.tpr[i]);
    }
    println!("auc {:.4} (area {:.4})\n", auc(&scores, &truth)?, curve.area());

    let ds = membership_benchmark(1000, 3)?;
    let part = make_partition(&ds, 2)?;
    let spec = ModelSpec::new(ModelKind::DecisionTree).with_seed(2);
    let target = train_model(&ds, &part.target_train, &spec)?;
    let mut ctx = AttackContext::new(&ds, &part, &target, spec, 2500, 2)?;
    let res = run_attack(&mut ctx, &AttackSpec::new(AttackFamily::RmiaOffline).with_references(16).with_seed(2))?;
    let opts = EvalOptions {
        alphas: vec![0.01, 0.1],
        bootstrap: 500,
        seed: 2,
    };
    println!("{}", evaluate(&res, &opts, None)?.to_json()?);
    Ok(())
}
