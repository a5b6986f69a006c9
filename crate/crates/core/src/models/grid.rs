//! Hyperparameter grids for the two centralized regimes and exhaustive grid
//! search with validation-accuracy selection.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{DefenseMode, HyperValue, ModelKind, ModelSpec};
use super::trained::{train_model_with_validation, TrainedModel};
use crate::data::{Dataset, Encoder};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRegime {
    /// Coarse grid without defenses.
    Weak,
    /// Finer grid with regularizing values and defended architectures.
    Defense,
}

/// Named value sequences whose cartesian product forms the candidate set.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperGrid {
    pub kind: ModelKind,
    pub regime: GridRegime,
    pub axes: Vec<(String, Vec<HyperValue>)>,
}

fn logspace(start: f64, stop: f64, num: usize) -> Vec<f64> {
    if num == 1 {
        return vec![10f64.powf(start)];
    }
    (0..num)
        .map(|i| 10f64.powf(start + (stop - start) * i as f64 / (num - 1) as f64))
        .collect()
}

fn nums(v: &[f64]) -> Vec<HyperValue> {
    v.iter().map(|&x| HyperValue::Number(x)).collect()
}

fn words(v: &[&str]) -> Vec<HyperValue> {
    v.iter().map(|&x| HyperValue::from(x)).collect()
}

impl HyperGrid {
    pub fn new(kind: ModelKind, regime: GridRegime) -> Self {
        use GridRegime::*;
        use ModelKind::*;
        let axes: Vec<(&str, Vec<HyperValue>)> = match (kind, regime) {
            (NaiveBayes, _) => {
                let n = if regime == Weak { 10 } else { 100 };
                let mut v = vec![1e-9];
                v.extend(logspace(0.0, -9.0, n));
                vec![("var_smoothing", nums(&v))]
            }
            (DecisionTree, Weak) => vec![
                ("criterion", words(&["gini"])),
                ("max_depth", nums(&[6.0, 8.0, 10.0])),
                ("min_samples_leaf", nums(&[1.0, 2.0])),
                ("min_samples_split", nums(&[2.0])),
            ],
            (DecisionTree, Defense) => vec![
                ("criterion", words(&["gini", "entropy"])),
                ("max_depth", nums(&[2.0, 4.0, 6.0, 8.0])),
                ("min_samples_leaf", nums(&[3.0, 5.0, 7.0, 9.0])),
                ("min_samples_split", nums(&[2.0, 5.0, 10.0])),
                ("ccp_alpha", nums(&[0.0, 1e-4, 1e-3, 1e-2, 1e-1])),
            ],
            (RandomForest, Weak) => vec![
                ("max_depth", nums(&[6.0, 8.0, 10.0])),
                ("n_estimators", nums(&[100.0, 400.0])),
                ("min_samples_leaf", nums(&[1.0, 2.0])),
                ("min_samples_split", nums(&[2.0])),
                ("max_features", vec![HyperValue::none()]),
            ],
            (RandomForest, Defense) => vec![
                ("max_depth", nums(&[2.0, 4.0, 6.0, 8.0])),
                ("n_estimators", nums(&[300.0, 500.0, 700.0])),
                ("min_samples_leaf", nums(&[3.0, 5.0, 7.0, 9.0])),
                ("min_samples_split", nums(&[2.0, 5.0, 10.0])),
                ("max_features", nums(&[0.3, 0.6, 0.9])),
            ],
            (GradientBoostedTrees, Weak) => vec![
                ("max_depth", nums(&[6.0, 8.0, 10.0])),
                ("n_estimators", nums(&[100.0, 400.0])),
                ("min_child_weight", nums(&[4.0, 7.0])),
                ("subsample", nums(&[1.0])),
                ("colsample_bytree", nums(&[1.0])),
                ("learning_rate", nums(&[0.3])),
                ("gamma", nums(&[0.0])),
                ("reg_alpha", nums(&[0.0])),
                ("reg_lambda", nums(&[1.0])),
            ],
            (GradientBoostedTrees, Defense) => vec![
                ("max_depth", nums(&[2.0, 4.0, 6.0, 8.0])),
                ("n_estimators", nums(&[1000.0])),
                ("early_stopping_rounds", nums(&[5.0])),
                ("min_child_weight", nums(&[5.0, 7.0, 9.0])),
                ("subsample", nums(&[0.3, 0.6])),
                ("colsample_bytree", nums(&[0.3, 0.6])),
                ("learning_rate", nums(&[0.001, 0.01, 0.1])),
                ("gamma", nums(&[0.0, 1.0])),
                ("reg_alpha", nums(&[0.0, 1.0])),
                ("reg_lambda", nums(&[10.0])),
            ],
            (LogisticRegression, Weak) => vec![
                ("penalty", vec![HyperValue::none()]),
                ("l1_ratio", vec![HyperValue::none()]),
                ("C", nums(&[0.0])),
                ("solver", words(&["lbfgs"])),
                ("tol", nums(&[1e-5, 1e-4])),
            ],
            (LogisticRegression, Defense) => vec![
                ("penalty", words(&["l2", "elasticnet"])),
                (
                    "l1_ratio",
                    vec![
                        HyperValue::none(),
                        HyperValue::Number(0.3),
                        HyperValue::Number(0.5),
                        HyperValue::Number(0.7),
                    ],
                ),
                ("C", nums(&[1e-4, 1e-3, 1e-2, 1e-1, 1.0])),
                ("solver", words(&["lbfgs", "newton-cg", "saga", "sag"])),
                ("tol", nums(&[1e-5, 1e-4, 1e-3, 1e-2])),
            ],
            (Mlp, _) => vec![],
        };
        Self {
            kind,
            regime,
            axes: axes.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    /// A grid with a single candidate built from explicit values.
    pub fn single(kind: ModelKind, regime: GridRegime, point: &BTreeMap<String, HyperValue>) -> Self {
        Self {
            kind,
            regime,
            axes: point
                .iter()
                .map(|(k, v)| (k.clone(), vec![v.clone()]))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidate specs in grid order; the last axis varies fastest.
    pub fn specs(&self, seed: u64) -> Vec<ModelSpec> {
        let mode = match self.regime {
            GridRegime::Weak => DefenseMode::None,
            GridRegime::Defense => DefenseMode::Defended,
        };
        let mut out = Vec::with_capacity(self.len());
        for idx in 0..self.len() {
            let mut spec = ModelSpec::new(self.kind).with_seed(seed);
            spec.defense_mode = mode;
            let mut rest = idx;
            for (name, values) in self.axes.iter().rev() {
                spec.hyperparameters
                    .insert(name.clone(), values[rest % values.len()].clone());
                rest /= values.len();
            }
            out.push(spec);
        }
        out
    }
}

/// Train/test accuracy and their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub gap: f64,
}

impl GeneralizationReport {
    pub fn new(train_accuracy: f64, test_accuracy: f64) -> Self {
        Self {
            train_accuracy,
            test_accuracy,
            gap: train_accuracy - test_accuracy,
        }
    }
}

/// Accuracy of `model` on `train` and `test` rows of `ds`.
pub fn generalization_gap(
    model: &TrainedModel,
    ds: &Dataset,
    train: &[usize],
    test: &[usize],
) -> Result<GeneralizationReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Evaluation(
            "generalization gap needs nonempty train and test rows".into(),
        ));
    }
    Ok(GeneralizationReport::new(
        accuracy_on(model, model.encoder(), ds, train)?,
        accuracy_on(model, model.encoder(), ds, test)?,
    ))
}

fn accuracy_on(model: &TrainedModel, enc: &Encoder, ds: &Dataset, rows: &[usize]) -> Result<f64> {
    Ok(model.accuracy(&enc.transform(ds, rows)?))
}

/// Winner of a grid search.
#[derive(Clone, Debug)]
pub struct GridSearchOutcome {
    pub model: TrainedModel,
    pub report: GeneralizationReport,
    /// Position of the winner in grid order.
    pub index: usize,
    pub evaluated: usize,
}

/// Train every candidate on `train`, score on `validation`, and keep the one
/// with the highest validation accuracy; ties go to the smaller gap, then to
/// the earlier grid position. Early-stopping candidates monitor `validation`.
pub fn grid_search(
    ds: &Dataset,
    grid: &HyperGrid,
    train: &[usize],
    validation: &[usize],
    seed: u64,
) -> Result<GridSearchOutcome> {
    if validation.is_empty() {
        return Err(Error::Evaluation("grid search needs validation rows".into()));
    }
    let specs = grid.specs(seed);
    if specs.is_empty() {
        return Err(Error::ModelSpec(format!("empty grid for {}", grid.kind)));
    }
    let encoder = Encoder::fit(ds, train)?;
    let train_m = encoder.transform(ds, train)?;
    let valid_m = encoder.transform(ds, validation)?;
    let evaluated = specs.len();
    let candidates: Vec<Result<(usize, TrainedModel, GeneralizationReport)>> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let model = train_model_with_validation(ds, train, Some(validation), spec)?;
            let report =
                GeneralizationReport::new(model.accuracy(&train_m), model.accuracy(&valid_m));
            Ok((i, model, report))
        })
        .collect();
    let mut best: Option<(usize, TrainedModel, GeneralizationReport)> = None;
    let mut first_error = None;
    for c in candidates {
        match c {
            Ok(c) => {
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => {
                        c.2.test_accuracy > b.test_accuracy
                            || (c.2.test_accuracy == b.test_accuracy && c.2.gap < b.gap)
                    }
                };
                if better {
                    best = Some(c);
                }
            }
            Err(e) => {
                log::warn!("grid candidate failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some((index, model, report)) => Ok(GridSearchOutcome {
            model,
            report,
            index,
            evaluated,
        }),
        None => Err(first_error.unwrap_or_else(|| Error::Training("no candidate trained".into()))),
    }
}
