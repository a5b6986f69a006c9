//! Surrogate transferability: every attack family against every target
//! kind, with shadow/reference/attack models of every surrogate kind.

use serde::{Deserialize, Serialize};

use super::{run_attack, AttackContext, AttackFamily, AttackResult, AttackSpec};
use crate::data::{DataPartition, Dataset};
use crate::error::{Error, Result};
use crate::models::{train_model, ModelKind, ModelSpec};
use crate::seed;

/// A target model to train on the partition's target split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferTarget {
    pub spec: ModelSpec,
}

impl TransferTarget {
    /// Library defaults for `kind`.
    pub fn new(kind: ModelKind) -> Self {
        Self {
            spec: ModelSpec::new(kind),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    pub family: AttackFamily,
    pub target: ModelKind,
    pub surrogate: ModelKind,
    /// Surrogate and target are the same kind.
    pub baseline: bool,
    pub seed: u64,
    pub result: Option<AttackResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub families: Vec<AttackFamily>,
    pub targets: Vec<ModelKind>,
    pub surrogates: Vec<ModelKind>,
    /// Family-major, then target, then surrogate.
    pub cells: Vec<TransferCell>,
}

impl TransferMatrix {
    pub fn cell(&self, family: AttackFamily, target: ModelKind, surrogate: ModelKind) -> Option<&TransferCell> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.target == target && c.surrogate == surrogate)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Evaluate the full attacks × targets × surrogates product on one
/// partition. `attacks` holds one template per family; its surrogate,
/// attack-model kind and seed are replaced per cell. Each target is trained
/// and queried once. Each (target, surrogate) pair gets a seed derived from
/// `seed`, shared by its families so that LiRA and RMIA reuse one reference
/// pool. Failing cells are recorded, never fatal.
pub fn run_transfer_matrix(
    ds: &Dataset,
    partition: &DataPartition,
    attacks: &[AttackSpec],
    targets: &[TransferTarget],
    surrogates: &[ModelKind],
    seed: u64,
    population_sample: usize,
) -> Result<TransferMatrix> {
    let families: Vec<AttackFamily> = attacks.iter().map(|a| a.family).collect();
    if families.is_empty() || targets.is_empty() || surrogates.is_empty() {
        return Err(Error::Attack("transfer matrix needs families, targets and surrogates".into()));
    }
    let mut slots: Vec<Vec<Vec<Option<TransferCell>>>> =
        vec![vec![vec![None; surrogates.len()]; targets.len()]; families.len()];

    for (ti, target) in targets.iter().enumerate() {
        let target_seed = seed::derive_seed(seed, &[seed::stage::TRANSFER, ti as u64]);
        let target_spec = target.spec.clone().with_seed(target_seed);
        let cell_seed = |si: usize| {
            seed::derive_seed(seed, &[seed::stage::TRANSFER, ti as u64, si as u64 + 1])
        };
        let model = train_model(ds, &partition.target_train, &target_spec);
        let ctx = match &model {
            Ok(m) => AttackContext::new(ds, partition, m, target_spec.clone(), population_sample, seed)
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let mut ctx = match ctx {
            Ok(c) => c.with_label(target.kind().to_string()),
            Err(e) => {
                log::warn!("transfer target {} failed: {e}", target.kind());
                for (fi, &family) in families.iter().enumerate() {
                    for (si, &surrogate) in surrogates.iter().enumerate() {
                        slots[fi][ti][si] = Some(TransferCell {
                            family,
                            target: target.kind(),
                            surrogate,
                            baseline: surrogate == target.kind(),
                            seed: cell_seed(si),
                            result: None,
                            error: Some(format!("target failed: {e}")),
                        });
                    }
                }
                continue;
            }
        };
        for (si, &surrogate) in surrogates.iter().enumerate() {
            for (fi, template) in attacks.iter().enumerate() {
                let family = template.family;
                let spec = AttackSpec {
                    surrogate_kind: Some(surrogate),
                    attack_model_kind: Some(surrogate),
                    seed: cell_seed(si),
                    ..template.clone()
                };
                let outcome = run_attack(&mut ctx, &spec);
                if let Err(e) = &outcome {
                    log::warn!("transfer cell {family}/{}/{surrogate} failed: {e}", target.kind());
                }
                let (result, error) = match outcome {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                slots[fi][ti][si] = Some(TransferCell {
                    family,
                    target: target.kind(),
                    surrogate,
                    baseline: surrogate == target.kind(),
                    seed: spec.seed,
                    result,
                    error,
                });
            }
        }
    }
    Ok(TransferMatrix {
        families,
        targets: targets.iter().map(TransferTarget::kind).collect(),
        surrogates: surrogates.to_vec(),
        cells: slots.into_iter().flatten().flatten().flatten().collect(),
    })
}
