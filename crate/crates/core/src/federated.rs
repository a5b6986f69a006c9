//! In-process horizontal federated learning.
//!
//! Parametric models (logistic regression, MLP) are trained with weighted
//! parameter averaging; boosted trees are trained cyclically, each participant
//! appending trees fitted to the residuals of the current global ensemble.
//! The finished model is handed out as a [`FederatedModel`], which answers
//! probability queries and nothing else.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, Dataset, EncodedMatrix, Encoder};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{
    BlackBox, Booster, Classifier, GbtParams, GradientBoosting, LogisticRegression, Mlp,
    ModelKind, ModelSpec, TrainedModel,
};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    FedavgWeights,
    CyclicBoosting,
}

impl Aggregation {
    pub fn for_kind(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::LogisticRegression | ModelKind::Mlp => Ok(Aggregation::FedavgWeights),
            ModelKind::GradientBoostedTrees => Ok(Aggregation::CyclicBoosting),
            other => Err(Error::Federated(format!(
                "{other} is not supported in federated training"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederatedConfig {
    pub n_participants: usize,
    pub rounds: usize,
    /// Local epochs per round for parametric models.
    pub local_epochs: usize,
    /// Boosting rounds each participant appends per turn.
    pub trees_per_round: usize,
    /// Defaults to the natural scheme for the model kind.
    pub aggregation: Option<Aggregation>,
    pub seed: u64,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        Self {
            n_participants: 3,
            rounds: 20,
            local_epochs: 10,
            trees_per_round: 2,
            aggregation: None,
            seed: 0,
        }
    }
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Federated("rounds must be at least 1".into()));
        }
        if self.n_participants < 2 {
            return Err(Error::Federated("need at least two participants".into()));
        }
        Ok(())
    }

    fn aggregation_for(&self, kind: ModelKind) -> Result<Aggregation> {
        let natural = Aggregation::for_kind(kind)?;
        match self.aggregation {
            Some(a) if a != natural => Err(Error::Federated(format!(
                "{a:?} aggregation does not apply to {kind}"
            ))),
            _ => Ok(natural),
        }
    }
}

/// One participant: its shard and its latest local parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantState {
    pub id: usize,
    pub shard: Vec<usize>,
    pub parameters: Vec<f64>,
}

/// Sample-size weighted mean of parameter vectors.
pub fn fedavg_aggregate(updates: &[(Vec<f64>, usize)]) -> Result<Vec<f64>> {
    let Some((first, _)) = updates.first() else {
        return Err(Error::Federated("no updates to aggregate".into()));
    };
    let dim = first.len();
    if updates.iter().any(|(t, _)| t.len() != dim) {
        return Err(Error::Federated("parameter shapes differ across participants".into()));
    }
    let total: usize = updates.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Federated("all shards are empty".into()));
    }
    let mut out = vec![0.0; dim];
    for (theta, n) in updates {
        let w = *n as f64 / total as f64;
        for (o, t) in out.iter_mut().zip(theta) {
            *o += w * t;
        }
    }
    Ok(out)
}

/// Parametric model being trained across participants.
enum Local {
    Logistic(LogisticRegression),
    Mlp(Mlp, crate::models::MlpParams),
}

impl Local {
    fn parameters(&self) -> &[f64] {
        match self {
            Local::Logistic(m) => m.parameters(),
            Local::Mlp(m, _) => m.parameters(),
        }
    }

    fn set_parameters(&mut self, theta: &[f64]) {
        match self {
            Local::Logistic(m) => m.set_parameters(theta),
            Local::Mlp(m, _) => m.parameters_mut().copy_from_slice(theta),
        }
    }

    fn into_classifier(self) -> Classifier {
        match self {
            Local::Logistic(m) => Classifier::LogisticRegression(m),
            Local::Mlp(m, _) => Classifier::Mlp(m),
        }
    }
}

/// Train `state` for `local_epochs` starting from `global`, on its shard
/// only. Returns the shard size used as the aggregation weight.
fn local_update(
    state: &mut ParticipantState,
    model: &mut Local,
    shard: &EncodedMatrix,
    global: &[f64],
    round: usize,
    local_epochs: usize,
    seed: u64,
) -> Result<usize> {
    if shard.is_empty() {
        return Err(Error::Federated(format!("participant {} has an empty shard", state.id)));
    }
    model.set_parameters(global);
    match model {
        Local::Logistic(m) => m.gradient_steps(shard, local_epochs),
        Local::Mlp(m, params) => {
            let mut rng = seed::rng(seed::derive_seed(seed, &[round as u64]));
            let start = round * local_epochs;
            m.train_epochs(shard, params, start..start + local_epochs, &mut rng);
        }
    }
    state.parameters = model.parameters().to_vec();
    Ok(shard.len())
}

/// The aggregated model inside the simulator.
#[derive(Clone, Debug)]
pub struct GlobalModel {
    model: TrainedModel,
    rounds: usize,
    participants: Vec<ParticipantState>,
}

impl GlobalModel {
    pub fn rounds_completed(&self) -> usize {
        self.rounds
    }

    /// Simulator-side view, including parameters.
    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn participants(&self) -> &[ParticipantState] {
        &self.participants
    }

    /// Hand the model to outsiders: prediction only.
    pub fn export(self) -> FederatedModel {
        FederatedModel {
            inner: self.model.into_black_box(),
        }
    }
}

/// Black-box handle on a federated global model.
#[derive(Clone, Debug)]
pub struct FederatedModel {
    inner: TrainedModel,
}

impl FederatedModel {
    pub fn kind(&self) -> ModelKind {
        self.inner.kind()
    }

    /// Persist in the model file format with the black-box flag set.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.inner.save(path)
    }
}

impl BlackBox for FederatedModel {
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    fn predict_proba(&self, row: &[Cell]) -> Result<Vec<f64>> {
        self.inner.predict_proba(row)
    }

    fn predict_many(&self, ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
        self.inner.predict_many(ds, rows)
    }
}

fn check_shards(shards: &[Vec<usize>], n_rows: usize) -> Result<()> {
    if shards.is_empty() {
        return Err(Error::Federated("no participants".into()));
    }
    for (j, s) in shards.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Federated(format!("participant {j} has an empty shard")));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= n_rows) {
            return Err(Error::Federated(format!("shard row {i} out of range")));
        }
    }
    Ok(())
}

/// Simulate federated training of `spec` over the `shards` of `ds`.
///
/// Shards are usually disjoint but may overlap; the feature encoder is fitted
/// on their de-duplicated union. Local training
/// seeds depend only on `cfg.seed` and the round, so participants holding
/// identical data produce identical updates.
pub fn train_federated(
    ds: &Dataset,
    shards: &[Vec<usize>],
    spec: &ModelSpec,
    cfg: &FederatedConfig,
) -> Result<GlobalModel> {
    if cfg.rounds == 0 {
        return Err(Error::Federated("rounds must be at least 1".into()));
    }
    spec.validate()?;
    let aggregation = cfg.aggregation_for(spec.kind)?;
    check_shards(shards, ds.len())?;
    let union: Vec<usize> = shards
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let first = ds.label(union[0]);
    if union.iter().all(|&i| ds.label(i) == first) {
        return Err(Error::Training("training rows contain a single class".into()));
    }
    let encoder = Encoder::fit(ds, &union)?;
    let data: Vec<EncodedMatrix> = shards
        .iter()
        .map(|s| encoder.transform(ds, s))
        .collect::<Result<_>>()?;
    let mut participants: Vec<ParticipantState> = shards
        .iter()
        .enumerate()
        .map(|(id, s)| ParticipantState {
            id,
            shard: s.clone(),
            parameters: Vec::new(),
        })
        .collect();
    let n_classes = ds.n_classes();
    let mut spec = spec.clone();
    spec.seed = cfg.seed;

    let classifier = match aggregation {
        Aggregation::FedavgWeights => {
            let mut model = match spec.kind {
                ModelKind::LogisticRegression => {
                    Local::Logistic(LogisticRegression::zeros(encoder.width(), n_classes))
                }
                _ => {
                    let params = crate::models::MlpParams::from_spec(&spec)?;
                    let mut rng = seed::rng(seed::derive_seed(cfg.seed, &[0]));
                    let m = Mlp::init(encoder.width(), params.hidden, n_classes, &mut rng);
                    Local::Mlp(m, params)
                }
            };
            let mut global = model.parameters().to_vec();
            for round in 0..cfg.rounds {
                let mut updates = Vec::with_capacity(participants.len());
                for (p, shard) in participants.iter_mut().zip(&data) {
                    let n = local_update(p, &mut model, shard, &global, round, cfg.local_epochs, cfg.seed)?;
                    updates.push((p.parameters.clone(), n));
                }
                global = fedavg_aggregate(&updates)?;
            }
            model.set_parameters(&global);
            model.into_classifier()
        }
        Aggregation::CyclicBoosting => {
            let params = GbtParams::from_spec(&spec)?;
            let mut counts = vec![0.0; n_classes];
            for d in &data {
                for &y in &d.labels {
                    counts[y] += 1.0;
                }
            }
            let mut model = GradientBoosting::prior_from_counts(&counts);
            let mut global_round = 0u64;
            for _ in 0..cfg.rounds {
                for shard in &data {
                    let mut booster = Booster::new(&mut model, shard);
                    for _ in 0..cfg.trees_per_round {
                        booster.boost_round(&params, seed::derive_seed(cfg.seed, &[global_round]));
                        global_round += 1;
                    }
                }
            }
            spec = spec.with("n_estimators", global_round as usize);
            Classifier::GradientBoostedTrees(model)
        }
    };
    Ok(GlobalModel {
        model: TrainedModel::from_parts(spec, encoder, n_classes, classifier),
        rounds: cfg.rounds,
        participants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_mean() {
        let g = fedavg_aggregate(&[(vec![0.0], 1), (vec![4.0], 3)]).unwrap();
        assert_eq!(g, vec![3.0]);
        let w = vec![1.5, -2.0];
        assert_eq!(fedavg_aggregate(&[(w.clone(), 5)]).unwrap(), w);
        assert!(fedavg_aggregate(&[(vec![1.0], 1), (vec![1.0, 2.0], 1)]).is_err());
    }

    #[test]
    fn unsupported_kinds_rejected() {
        for kind in [ModelKind::NaiveBayes, ModelKind::DecisionTree, ModelKind::RandomForest] {
            assert!(Aggregation::for_kind(kind).is_err());
        }
    }
}
