//! End-to-end invariants of partitions, reference pools, attacks and the
//! federated export.

use std::collections::BTreeSet;

use proptest::prelude::*;

use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackResult, AttackSpec, PoolMode};
use tabmia::data::{make_federated_shards, make_partition, partition_rows, synthetic::membership_benchmark};
use tabmia::federated::{train_federated, FederatedConfig};
use tabmia::models::{train_model, BlackBox, ModelKind, ModelSpec, TrainedModel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partitions_are_disjoint_and_balanced(n in 8usize..5000, seed in any::<u64>()) {
        let p = partition_rows(n, seed).unwrap();
        let mut all: Vec<usize> = p.population.iter()
            .chain(&p.target_train)
            .chain(&p.target_test)
            .copied()
            .collect();
        let len = all.len();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), len);
        prop_assert_eq!(len, n);
        prop_assert_eq!(p.population.len(), n / 2);
        prop_assert_eq!(p.inference_members.len(), p.inference_nonmembers.len());
        let train: BTreeSet<_> = p.target_train.iter().collect();
        let test: BTreeSet<_> = p.target_test.iter().collect();
        prop_assert!(p.inference_members.iter().all(|r| train.contains(r)));
        prop_assert!(p.inference_nonmembers.iter().all(|r| test.contains(r)));
        prop_assert_eq!(p.inference_members.len(), p.target_train.len().div_ceil(4).min(p.target_test.len()));
        prop_assert_eq!(partition_rows(n, seed).unwrap(), p);
    }
}

#[test]
fn desk_partition_sizes() {
    let p = partition_rows(1000, 0).unwrap();
    assert_eq!(
        (p.population.len(), p.target_train.len(), p.target_test.len(), p.inference_members.len()),
        (500, 375, 125, 94)
    );
}

#[test]
fn federated_shards_cover_target_train() {
    let p = partition_rows(900, 4).unwrap();
    let shards = make_federated_shards(&p, 4, 4).unwrap();
    let mut rows: Vec<usize> = shards.iter().flat_map(|s| s.train.iter().copied()).collect();
    rows.sort_unstable();
    let mut want = p.target_train.clone();
    want.sort_unstable();
    assert_eq!(rows, want);
    let sizes: Vec<usize> = shards.iter().map(|s| s.train.len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
}

#[test]
fn reference_pools_respect_their_mode() {
    let ds = membership_benchmark(600, 3).unwrap();
    let part = make_partition(&ds, 3).unwrap();
    let spec = ModelSpec::new(ModelKind::NaiveBayes).with_seed(3);
    let target = train_model(&ds, &part.target_train, &spec).unwrap();
    let mut ctx = AttackContext::new(&ds, &part, &target, spec, 400, 3).unwrap();

    let online = ctx.reference_pool(PoolMode::Online, ModelKind::NaiveBayes, 8, 1).unwrap();
    assert_eq!(online.len(), 8);
    for q in 0..ctx.inference_rows().len() {
        assert_eq!(online.in_out_counts(q), (4, 4));
    }
    let allowed: BTreeSet<usize> = part
        .population
        .iter()
        .chain(ctx.inference_rows())
        .copied()
        .collect();
    for m in &online.models {
        assert!(m.train_rows.iter().all(|r| allowed.contains(r)));
    }

    let offline = ctx.reference_pool(PoolMode::Offline, ModelKind::NaiveBayes, 6, 1).unwrap();
    let population: BTreeSet<usize> = part.population.iter().copied().collect();
    for m in &offline.models {
        assert_eq!(m.train_rows.len(), part.target_train.len().min(part.population.len()));
        assert!(m.train_rows.iter().all(|r| population.contains(r)));
        assert!(m.query_in.iter().all(|&b| !b));
        assert_eq!(m.population_proba.rows(), ctx.population_sample().len());
    }

    // cached: same Arc on a second request
    let again = ctx.reference_pool(PoolMode::Offline, ModelKind::NaiveBayes, 6, 1).unwrap();
    assert!(std::sync::Arc::ptr_eq(&offline, &again));
}

fn all_families(target: &dyn BlackBox, spec: ModelSpec, seed: u64) -> Vec<AttackResult> {
    let ds = membership_benchmark(500, 8).unwrap();
    let part = make_partition(&ds, 8).unwrap();
    let mut ctx = AttackContext::new(&ds, &part, target, spec, 300, seed).unwrap();
    AttackFamily::ALL
        .iter()
        .map(|&f| {
            run_attack(&mut ctx, &AttackSpec::new(f).with_references(8).with_seed(seed)).unwrap()
        })
        .collect()
}

fn target(kind: ModelKind) -> (TrainedModel, ModelSpec) {
    let ds = membership_benchmark(500, 8).unwrap();
    let part = make_partition(&ds, 8).unwrap();
    let spec = ModelSpec::new(kind).with_seed(8);
    (train_model(&ds, &part.target_train, &spec).unwrap(), spec)
}

#[test]
fn attacks_are_deterministic_and_well_formed() {
    let (model, spec) = target(ModelKind::DecisionTree);
    let a = all_families(&model, spec.clone(), 5);
    let b = all_families(&model, spec, 5);
    assert_eq!(a.len(), AttackFamily::ALL.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_json().unwrap(), y.to_json().unwrap(), "{}", x.family);
        assert_eq!(x.scores.len(), x.truth.len());
        assert_eq!(x.truth.iter().filter(|&&t| t).count() * 2, x.truth.len());
        assert!(x.scores.iter().all(|s| s.is_finite()), "{}", x.family);
        let back = AttackResult::from_json(&x.to_json().unwrap()).unwrap();
        assert_eq!(&back, x);
    }
}

#[test]
fn model_files_round_trip() {
    let (model, _) = target(ModelKind::GradientBoostedTrees);
    let back = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
    let ds = membership_benchmark(500, 8).unwrap();
    let rows: Vec<usize> = (0..50).collect();
    assert_eq!(
        model.predict_many(&ds, &rows).unwrap(),
        back.predict_many(&ds, &rows).unwrap()
    );
}

#[test]
fn federated_export_answers_like_central_models() {
    let ds = membership_benchmark(500, 8).unwrap();
    let part = make_partition(&ds, 8).unwrap();
    let cfg = FederatedConfig {
        rounds: 4,
        local_epochs: 3,
        seed: 8,
        ..FederatedConfig::default()
    };
    let shards = make_federated_shards(&part, 3, 8).unwrap();
    let trains: Vec<Vec<usize>> = shards.into_iter().map(|s| s.train).collect();
    let spec = ModelSpec::new(ModelKind::LogisticRegression).with_seed(8);
    let global = train_federated(&ds, &trains, &spec, &cfg).unwrap();
    let handle = global.export();
    let fed = all_families(&handle, spec.clone(), 5);

    let (central, _) = target(ModelKind::LogisticRegression);
    let cen = all_families(&central, spec, 5);
    for (f, c) in fed.iter().zip(&cen) {
        let fv: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        let cv: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        let keys = |v: &serde_json::Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
        assert_eq!(keys(&fv), keys(&cv));
        assert_eq!(f.record_ids, c.record_ids);
    }
}
