//! Threshold attacks on correctness, loss, confidence and modified entropy,
//! calibrated on a shadow model.

use tabmia::attacks::{
    metric_score, run_attack, AttackContext, AttackFamily, AttackSpec, MetricFamily, ThresholdMethod,
};
use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::eval::{advantage, classification_metrics};
use tabmia::models::{train_model, ModelKind, ModelSpec};

fn main() -> tabmia::Result<()> {
    let p = [0.7, 0.2, 0.1];
    for m in [
        MetricFamily::Correctness,
        MetricFamily::Loss,
        MetricFamily::Confidence,
        MetricFamily::ModifiedEntropy,
    ] {
        println!("{m:?}(p = {p:?}, y = 0) = {:.4}", metric_score(&p, 0, m));
    }

    let ds = membership_benchmark(1000, 2)?;
    let part = make_partition(&ds, 4)?;
    let spec = ModelSpec::new(ModelKind::GradientBoostedTrees).with_seed(4);
    let target = train_model(&ds, &part.target_train, &spec)?;
    let mut ctx = AttackContext::new(&ds, &part, &target, spec, 2500, 4)?;
    for family in [
        AttackFamily::MetricCorrectness,
        AttackFamily::MetricLoss,
        AttackFamily::MetricConfidence,
        AttackFamily::MetricModifiedEntropy,
    ] {
        for method in [ThresholdMethod::Sweep, ThresholdMethod::Percentile { top: 30.0 }] {
            let mut attack = AttackSpec::new(family).with_seed(4);
            attack.threshold = method;
            let res = run_attack(&mut ctx, &attack)?;
            let c = classification_metrics(&res.predicted, &res.truth)?;
            println!(
                "{family:<24} {:<24} advantage {:+.3} recall {:.3}",
                format!("{method:?}"),
                advantage(&res)?,
                c.recall.unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
