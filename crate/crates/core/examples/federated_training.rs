//! Simulate horizontal federated learning and attack the exported global
//! model as an outsider.

use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackSpec};
use tabmia::data::{make_federated_shards, make_partition, synthetic::membership_benchmark};
use tabmia::eval::roc_auc;
use tabmia::federated::{train_federated, FederatedConfig};
use tabmia::models::{generalization_gap, ModelKind, ModelSpec};

fn main() -> tabmia::Result<()> {
    let ds = membership_benchmark(900, 2)?;
    let part = make_partition(&ds, 11)?;
    let cfg = FederatedConfig {
        n_participants: 3,
        rounds: 10,
        local_epochs: 5,
        seed: 11,
        ..FederatedConfig::default()
    };
    let shards = make_federated_shards(&part, cfg.n_participants, cfg.seed)?;
    let trains: Vec<Vec<usize>> = shards.into_iter().map(|s| s.train).collect();
    println!("shard sizes: {:?}", trains.iter().map(Vec::len).collect::<Vec<_>>());

    for kind in [ModelKind::LogisticRegression, ModelKind::GradientBoostedTrees] {
        let spec = ModelSpec::new(kind).with_seed(cfg.seed);
        let global = train_federated(&ds, &trains, &spec, &cfg)?;
        let g = generalization_gap(global.model(), &ds, &part.target_train, &part.target_test)?;
        println!("{kind}: {} rounds, gap {:+.3}", global.rounds_completed(), g.gap);

        // From here on only predictions are visible.
        let handle = global.export();
        let mut ctx = AttackContext::new(&ds, &part, &handle, spec, 1000, 5)?;
        for family in [AttackFamily::LiraOffline, AttackFamily::MetricLoss] {
            let res = run_attack(&mut ctx, &AttackSpec::new(family).with_references(16).with_seed(5))?;
            println!("  {family:<12} auc {:.3}", roc_auc(&res)?.1);
        }
    }
    Ok(())
}
