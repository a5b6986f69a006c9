//! Train every model kind, then grid-search a decision tree under the weak
//! and defense grids and compare generalization gaps.

use tabmia::data::{make_partition, synthetic::membership_benchmark};
use tabmia::models::{
    generalization_gap, grid_search, train_model, BlackBox, GridRegime, HyperGrid, ModelKind, ModelSpec,
};

fn main() -> tabmia::Result<()> {
    let ds = membership_benchmark(1000, 1)?;
    let part = make_partition(&ds, 3)?;

    for kind in [
        ModelKind::NaiveBayes,
        ModelKind::LogisticRegression,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoostedTrees,
        ModelKind::Mlp,
    ] {
        let spec = ModelSpec::new(kind).with_seed(1);
        let model = train_model(&ds, &part.target_train, &spec)?;
        let g = generalization_gap(&model, &ds, &part.target_train, &part.target_test)?;
        let p = model.predict_proba(ds.row(part.target_test[0]))?;
        println!(
            "{:<24} train {:.3} test {:.3} gap {:+.3}  p(first test row) = {:.3?}",
            kind.as_str(),
            g.train_accuracy,
            g.test_accuracy,
            g.gap,
            p
        );
    }

    // Hold out a quarter of target-train for model selection.
    let cut = part.target_train.len() * 3 / 4;
    let (fit, val) = part.target_train.split_at(cut);
    for regime in [GridRegime::Weak, GridRegime::Defense] {
        let grid = HyperGrid::new(ModelKind::DecisionTree, regime);
        let best = grid_search(&ds, &grid, fit, val, 1)?;
        let g = generalization_gap(&best.model, &ds, &part.target_train, &part.target_test)?;
        println!(
            "{regime:?}: {} candidates, picked {} (gap {:+.3})",
            best.evaluated,
            best.model.spec().describe(),
            g.gap
        );
    }
    Ok(())
}
