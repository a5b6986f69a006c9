//! Shadow-model attack: one population-trained shadow model labels an
//! attack-training table, and an attack classifier learns member versus
//! non-member from output features.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttackContext, AttackResult, AttackSpec, ThresholdRule};
use crate::data::{Cell, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::models::{argmax, train_model, BlackBox, ModelKind, TrainedModel};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowMode {
    /// One-hot predicted label plus the true label.
    Predictions,
    /// Sorted top-k probabilities plus the true label.
    Probabilities,
}

/// A shadow model and the population rows it was (and was not) trained on.
#[derive(Debug)]
pub struct ShadowModel {
    pub model: TrainedModel,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Train the shadow model of `kind` on population rows only. The training
/// split mimics the target's size; the held-out split is capped at the
/// target's test size.
pub(crate) fn train_shadow(ctx: &AttackContext, kind: ModelKind, seed: u64) -> Result<ShadowModel> {
    let part = ctx.partition;
    let pop = part.population.len();
    let mut want = part.target_train.len();
    let cap = pop * 3 / 4;
    if want > cap {
        log::warn!("population of {pop} rows is too small for a {want}-row shadow split; using {cap}");
        want = cap;
    }
    if want == 0 || want >= pop {
        return Err(Error::Attack(format!("population of {pop} rows cannot hold a shadow split")));
    }
    let mut rows = part.population.clone();
    rows.shuffle(&mut seed::rng(seed::derive_seed(seed, &[seed::stage::SHADOW])));
    let mut test_rows = rows.split_off(want);
    test_rows.truncate(part.target_test.len().max(1));
    let mut train_rows = rows;
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let spec = ctx.adversary_spec(kind, seed::derive_seed(seed, &[seed::stage::SHADOW, 1]));
    let model = train_model(ctx.ds, &train_rows, &spec)?;
    Ok(ShadowModel {
        model,
        train_rows,
        test_rows,
    })
}

/// Feature vector for one probability vector and true label.
pub(crate) fn shadow_features(p: &[f64], y: usize, mode: ShadowMode, top_k: usize) -> Vec<f64> {
    let mut f = match mode {
        ShadowMode::Predictions => {
            let mut one_hot = vec![0.0; p.len()];
            one_hot[argmax(p)] = 1.0;
            one_hot
        }
        ShadowMode::Probabilities => {
            let mut sorted = p.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted.truncate(top_k);
            sorted
        }
    };
    f.push(y as f64);
    f
}

/// Rows of the attack classifier's training set.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackTable {
    pub features: Vec<Vec<f64>>,
    pub member: Vec<bool>,
}

impl AttackTable {
    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    /// Numeric dataset with a binary `member` label in the last column.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let width = self.features.first().map_or(0, Vec::len);
        let mut columns: Vec<ColumnSchema> =
            (0..width).map(|j| ColumnSchema::numeric(format!("f{j}"))).collect();
        columns.push(ColumnSchema::categorical("member", ["0", "1"]));
        let rows = self
            .features
            .iter()
            .zip(&self.member)
            .map(|(f, &m)| {
                let mut row: Vec<Cell> = f.iter().map(|&v| Cell::Num(v)).collect();
                row.push(Cell::Cat(u32::from(m)));
                row
            })
            .collect();
        Dataset::new("attack_table", columns, rows, width)
    }
}

/// One row per shadow-train (member) and shadow-test (non-member) record.
pub fn build_shadow_attack_dataset(
    shadow: &dyn BlackBox,
    ds: &Dataset,
    shadow_train: &[usize],
    shadow_test: &[usize],
    mode: ShadowMode,
    top_k: usize,
) -> Result<AttackTable> {
    let mut table = AttackTable {
        features: Vec::with_capacity(shadow_train.len() + shadow_test.len()),
        member: Vec::with_capacity(shadow_train.len() + shadow_test.len()),
    };
    for (rows, member) in [(shadow_train, true), (shadow_test, false)] {
        let proba = shadow.predict_many(ds, rows)?;
        for (i, &r) in rows.iter().enumerate() {
            table
                .features
                .push(shadow_features(proba.row(i), ds.label(r), mode, top_k));
            table.member.push(member);
        }
    }
    Ok(table)
}

/// Down-sample the larger side so members and non-members are equally many.
fn balance(table: AttackTable, seed: u64) -> AttackTable {
    let (mut ins, mut outs): (Vec<usize>, Vec<usize>) =
        (0..table.len()).partition(|&i| table.member[i]);
    let n = ins.len().min(outs.len());
    let mut rng = seed::rng(seed);
    for side in [&mut ins, &mut outs] {
        if side.len() > n {
            side.shuffle(&mut rng);
            side.truncate(n);
            side.sort_unstable();
        }
    }
    let keep: Vec<usize> = ins.into_iter().chain(outs).collect();
    AttackTable {
        features: keep.iter().map(|&i| table.features[i].clone()).collect(),
        member: keep.iter().map(|&i| table.member[i]).collect(),
    }
}

/// Score each inference record by the attack classifier's member
/// probability; members are called at 0.5.
pub fn run_shadow_attack(ctx: &mut AttackContext, spec: &AttackSpec, mode: ShadowMode) -> Result<AttackResult> {
    let kind = spec.surrogate(ctx.target_spec.kind);
    let shadow = ctx.shadow_model(kind, spec.seed)?;
    let top_k = spec.top_k(ctx.n_classes());
    let table = build_shadow_attack_dataset(
        &shadow.model,
        ctx.ds,
        &shadow.train_rows,
        &shadow.test_rows,
        mode,
        top_k,
    )?;
    let table = balance(table, seed::derive_seed(spec.seed, &[seed::stage::ATTACK_MODEL, 1]));
    let attack_ds = table.to_dataset()?;
    let attack_kind = spec.attack_model_kind.unwrap_or(kind);
    let attack_spec = crate::models::ModelSpec::new(attack_kind)
        .with_seed(seed::derive_seed(spec.seed, &[seed::stage::ATTACK_MODEL]));
    let all: Vec<usize> = (0..attack_ds.len()).collect();
    let attack = train_model(&attack_ds, &all, &attack_spec)?;

    let rows = ctx.inference_rows().to_vec();
    let rule = ThresholdRule::single(0.5);
    let mut scores = Vec::with_capacity(rows.len());
    let mut predicted = Vec::with_capacity(rows.len());
    for (q, &r) in rows.iter().enumerate() {
        let y = ctx.ds.label(r);
        let feats = shadow_features(ctx.inference_proba().row(q), y, mode, top_k);
        let mut cells: Vec<Cell> = feats.into_iter().map(Cell::Num).collect();
        cells.push(Cell::Cat(0));
        let s = attack.predict_proba(&cells)?[1];
        predicted.push(rule.decide(s, y));
        scores.push(s);
    }
    AttackResult::new(
        spec.family,
        ctx.target_label.clone(),
        spec.seed,
        rows,
        scores,
        predicted,
        ctx.truth().to_vec(),
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_features_are_sorted_top_k() {
        let f = shadow_features(&[0.1, 0.6, 0.3], 2, ShadowMode::Probabilities, 2);
        assert_eq!(f, vec![0.6, 0.3, 2.0]);
        let f = shadow_features(&[0.1, 0.6, 0.3], 0, ShadowMode::Predictions, 2);
        assert_eq!(f, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn balancing_equalises_sides() {
        let t = AttackTable {
            features: (0..7).map(|i| vec![i as f64]).collect(),
            member: vec![true, true, true, true, true, false, false],
        };
        let b = balance(t, 3);
        assert_eq!(b.len(), 4);
        assert_eq!(b.member.iter().filter(|&&m| m).count(), 2);
        let ds = b.to_dataset().unwrap();
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.label_column(), 1);
    }
}
