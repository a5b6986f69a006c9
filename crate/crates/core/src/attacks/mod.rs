//! Membership-inference attacks against black-box tabular classifiers.
//!
//! Every attack scores the inference set of a [`DataPartition`] through an
//! [`AttackContext`], which caches the target's answers so that each record
//! is queried once. Reference-model pools are cached as well and shared by
//! LiRA and RMIA.

mod lira;
mod metric;
mod reference;
mod result;
mod rmia;
mod shadow;
mod transfer;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{DataPartition, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{BlackBox, ModelKind, ModelSpec};
use crate::seed;

pub use lira::{lira_score, logit_confidence, run_lira, GaussianFit, VARIANCE_FLOOR};
pub use metric::{
    metric_score, run_metric_attack, select_threshold, stored_metric_score, sweep_threshold,
    MetricFamily, ThresholdMethod,
};
pub use reference::{train_reference_pool, PoolMode, ReferenceModel, ReferencePool};
pub use result::{AttackResult, ThresholdRule};
pub use rmia::{rmia_score, run_rmia};
pub use shadow::{
    build_shadow_attack_dataset, run_shadow_attack, AttackTable, ShadowMode, ShadowModel,
};
pub use transfer::{run_transfer_matrix, TransferCell, TransferMatrix, TransferTarget};

/// Probability floor applied before any logarithm or division.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFamily {
    ShadowPredictions,
    ShadowProbabilities,
    LiraOnline,
    LiraOffline,
    RmiaOnline,
    RmiaOffline,
    MetricCorrectness,
    MetricLoss,
    MetricConfidence,
    MetricModifiedEntropy,
}

impl AttackFamily {
    pub const ALL: [AttackFamily; 10] = [
        AttackFamily::ShadowPredictions,
        AttackFamily::ShadowProbabilities,
        AttackFamily::LiraOnline,
        AttackFamily::LiraOffline,
        AttackFamily::RmiaOnline,
        AttackFamily::RmiaOffline,
        AttackFamily::MetricCorrectness,
        AttackFamily::MetricLoss,
        AttackFamily::MetricConfidence,
        AttackFamily::MetricModifiedEntropy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackFamily::ShadowPredictions => "shadow_predictions",
            AttackFamily::ShadowProbabilities => "shadow_probabilities",
            AttackFamily::LiraOnline => "lira_online",
            AttackFamily::LiraOffline => "lira_offline",
            AttackFamily::RmiaOnline => "rmia_online",
            AttackFamily::RmiaOffline => "rmia_offline",
            AttackFamily::MetricCorrectness => "metric_correctness",
            AttackFamily::MetricLoss => "metric_loss",
            AttackFamily::MetricConfidence => "metric_confidence",
            AttackFamily::MetricModifiedEntropy => "metric_modified_entropy",
        }
    }

    /// Reference-pool mode, for LiRA and RMIA.
    pub fn pool_mode(&self) -> Option<PoolMode> {
        match self {
            AttackFamily::LiraOnline | AttackFamily::RmiaOnline => Some(PoolMode::Online),
            AttackFamily::LiraOffline | AttackFamily::RmiaOffline => Some(PoolMode::Offline),
            _ => None,
        }
    }

    /// Whether a ROC curve is meaningful (correctness scores are binary).
    pub fn has_roc(&self) -> bool {
        *self != AttackFamily::MetricCorrectness
    }
}

impl fmt::Display for AttackFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for AttackFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Attack(format!("unknown attack family {s:?}")))
    }
}

/// Per-attack knobs. Unset options take the documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub family: AttackFamily,
    /// Reference models for LiRA/RMIA; 256 online, 128 offline by default.
    pub n_reference_models: Option<usize>,
    /// Kind of the shadow and reference models; defaults to the target kind.
    pub surrogate_kind: Option<ModelKind>,
    /// Kind of the shadow attack classifier; defaults to the surrogate kind.
    pub attack_model_kind: Option<ModelKind>,
    /// Probabilities kept by the shadow attack; 2 for binary tasks, else 3.
    pub top_k: Option<usize>,
    pub rmia_gamma: f64,
    pub rmia_offline_a: f64,
    /// RMIA decision threshold on the score.
    pub rmia_beta: f64,
    pub threshold: ThresholdMethod,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(family: AttackFamily) -> Self {
        Self {
            family,
            n_reference_models: None,
            surrogate_kind: None,
            attack_model_kind: None,
            top_k: None,
            rmia_gamma: 2.0,
            rmia_offline_a: 0.3,
            rmia_beta: 0.5,
            threshold: ThresholdMethod::Sweep,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_references(mut self, n: usize) -> Self {
        self.n_reference_models = Some(n);
        self
    }

    pub fn with_surrogate(mut self, kind: ModelKind) -> Self {
        self.surrogate_kind = Some(kind);
        self
    }

    pub fn n_references(&self) -> usize {
        self.n_reference_models.unwrap_or(match self.family.pool_mode() {
            Some(PoolMode::Offline) => 128,
            _ => 256,
        })
    }

    /// Kind used for shadow and reference models.
    pub fn surrogate(&self, target: ModelKind) -> ModelKind {
        self.surrogate_kind.unwrap_or(target)
    }

    /// Seed of the reference pool; identical for LiRA and RMIA so the two
    /// share models.
    pub fn pool_seed(&self, mode: PoolMode) -> u64 {
        seed::derive_seed(self.seed, &[seed::stage::REFERENCE, mode as u64])
    }

    pub fn top_k(&self, n_classes: usize) -> usize {
        let k = self
            .top_k
            .unwrap_or(if n_classes == 2 { 2 } else { 3 });
        k.clamp(1, n_classes)
    }
}

/// Everything the adversary works with for one target: the dataset, the
/// partition (population knowledge), black-box access and a guess of the
/// training algorithm.
pub struct AttackContext<'a> {
    pub ds: &'a Dataset,
    pub partition: &'a DataPartition,
    target: &'a dyn BlackBox,
    /// Training configuration the adversary assumes for the target.
    pub target_spec: ModelSpec,
    pub target_label: String,
    inference_rows: Vec<usize>,
    truth: Vec<bool>,
    inference_proba: Matrix,
    z_rows: Vec<usize>,
    z_proba: Matrix,
    pools: BTreeMap<(PoolMode, ModelKind, usize, u64), Arc<ReferencePool>>,
    shadows: BTreeMap<(ModelKind, u64), Arc<ShadowModel>>,
}

impl<'a> AttackContext<'a> {
    /// Query the target once on the inference set and on a population
    /// sample of at most `population_sample` rows (used by RMIA).
    pub fn new(
        ds: &'a Dataset,
        partition: &'a DataPartition,
        target: &'a dyn BlackBox,
        target_spec: ModelSpec,
        population_sample: usize,
        seed: u64,
    ) -> Result<Self> {
        partition.validate()?;
        if partition.n_rows != ds.len() {
            return Err(Error::Attack("partition does not match the dataset".into()));
        }
        let inference_rows = partition.inference_set();
        let truth = partition.inference_truth();
        let inference_proba = target.predict_many(ds, &inference_rows)?;
        let mut z_rows = partition.population.clone();
        if z_rows.len() > population_sample {
            use rand::seq::SliceRandom;
            let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stage::POPULATION_SAMPLE]));
            z_rows.shuffle(&mut rng);
            z_rows.truncate(population_sample.max(1));
            z_rows.sort_unstable();
        }
        let z_proba = target.predict_many(ds, &z_rows)?;
        Ok(Self {
            ds,
            partition,
            target,
            target_label: target_spec.kind.to_string(),
            target_spec,
            inference_rows,
            truth,
            inference_proba,
            z_rows,
            z_proba,
            pools: BTreeMap::new(),
            shadows: BTreeMap::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.target_label = label.into();
        self
    }

    pub fn target(&self) -> &dyn BlackBox {
        self.target
    }

    pub fn n_classes(&self) -> usize {
        self.target.n_classes()
    }

    pub fn inference_rows(&self) -> &[usize] {
        &self.inference_rows
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    /// Cached target probabilities, one row per inference record.
    pub fn inference_proba(&self) -> &Matrix {
        &self.inference_proba
    }

    pub fn population_sample(&self) -> &[usize] {
        &self.z_rows
    }

    pub(crate) fn population_sample_proba(&self) -> &Matrix {
        &self.z_proba
    }

    /// Spec the adversary trains for a model of `kind`: the target's own
    /// configuration when the kinds match, library defaults otherwise.
    pub fn adversary_spec(&self, kind: ModelKind, seed: u64) -> ModelSpec {
        let mut spec = if kind == self.target_spec.kind {
            self.target_spec.clone()
        } else {
            ModelSpec::new(kind)
        };
        spec.seed = seed;
        spec
    }

    /// Build (or fetch) a reference pool; pools are cached per
    /// (mode, kind, size, seed).
    pub fn reference_pool(
        &mut self,
        mode: PoolMode,
        kind: ModelKind,
        n_models: usize,
        seed: u64,
    ) -> Result<Arc<ReferencePool>> {
        let key = (mode, kind, n_models, seed);
        if let Some(pool) = self.pools.get(&key) {
            return Ok(Arc::clone(pool));
        }
        let pool = Arc::new(train_reference_pool(self, mode, kind, n_models, seed)?);
        self.pools.insert(key, Arc::clone(&pool));
        Ok(pool)
    }

    /// Build (or fetch) the single shadow model of `kind` for `seed`, shared
    /// by the shadow and metric attacks.
    pub fn shadow_model(&mut self, kind: ModelKind, seed: u64) -> Result<Arc<ShadowModel>> {
        if let Some(s) = self.shadows.get(&(kind, seed)) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(shadow::train_shadow(self, kind, seed)?);
        self.shadows.insert((kind, seed), Arc::clone(&s));
        Ok(s)
    }
}

/// Run one attack family against the context's target.
pub fn run_attack(ctx: &mut AttackContext, spec: &AttackSpec) -> Result<AttackResult> {
    match spec.family {
        AttackFamily::ShadowPredictions => run_shadow_attack(ctx, spec, ShadowMode::Predictions),
        AttackFamily::ShadowProbabilities => {
            run_shadow_attack(ctx, spec, ShadowMode::Probabilities)
        }
        AttackFamily::LiraOnline | AttackFamily::LiraOffline => run_lira(ctx, spec),
        AttackFamily::RmiaOnline | AttackFamily::RmiaOffline => run_rmia(ctx, spec),
        AttackFamily::MetricCorrectness => run_metric_attack(ctx, spec, MetricFamily::Correctness),
        AttackFamily::MetricLoss => run_metric_attack(ctx, spec, MetricFamily::Loss),
        AttackFamily::MetricConfidence => run_metric_attack(ctx, spec, MetricFamily::Confidence),
        AttackFamily::MetricModifiedEntropy => {
            run_metric_attack(ctx, spec, MetricFamily::ModifiedEntropy)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in AttackFamily::ALL {
            assert_eq!(f.as_str().parse::<AttackFamily>().unwrap(), f);
        }
        assert!("lira".parse::<AttackFamily>().is_err());
    }

    #[test]
    fn defaults() {
        let s = AttackSpec::new(AttackFamily::LiraOffline);
        assert_eq!(s.n_references(), 128);
        assert_eq!(AttackSpec::new(AttackFamily::RmiaOnline).n_references(), 256);
        assert_eq!(s.top_k(2), 2);
        assert_eq!(s.top_k(5), 3);
        let s = AttackSpec {
            top_k: Some(4),
            ..AttackSpec::new(AttackFamily::ShadowProbabilities)
        };
        assert_eq!(s.top_k(3), 3);
    }
}
