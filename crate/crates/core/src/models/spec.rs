use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    GradientBoostedTrees,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::NaiveBayes,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoostedTrees,
        ModelKind::LogisticRegression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoostedTrees => "gradient_boosted_trees",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Short table label (NN, NB, DT, RF, XGB, LR).
    pub fn short(&self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "NB",
            ModelKind::LogisticRegression => "LR",
            ModelKind::DecisionTree => "DT",
            ModelKind::RandomForest => "RF",
            ModelKind::GradientBoostedTrees => "XGB",
            ModelKind::Mlp => "NN",
        }
    }

    fn allowed_hyperparameters(&self) -> &'static [&'static str] {
        match self {
            ModelKind::NaiveBayes => &["var_smoothing"],
            ModelKind::DecisionTree => &[
                "criterion",
                "max_depth",
                "min_samples_leaf",
                "min_samples_split",
                "max_features",
                "ccp_alpha",
            ],
            ModelKind::RandomForest => &[
                "criterion",
                "max_depth",
                "n_estimators",
                "min_samples_leaf",
                "min_samples_split",
                "max_features",
            ],
            ModelKind::GradientBoostedTrees => &[
                "max_depth",
                "n_estimators",
                "min_child_weight",
                "subsample",
                "colsample_bytree",
                "learning_rate",
                "gamma",
                "reg_alpha",
                "reg_lambda",
                "early_stopping_rounds",
            ],
            ModelKind::LogisticRegression => {
                &["penalty", "l1_ratio", "C", "solver", "tol", "max_iter"]
            }
            ModelKind::Mlp => &[
                "hidden_units",
                "learning_rate",
                "weight_decay",
                "step_size",
                "step_gamma",
                "epochs",
                "batch_size",
                "dropout",
            ],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "naive_bayes" | "nb" => ModelKind::NaiveBayes,
            "logistic_regression" | "lr" => ModelKind::LogisticRegression,
            "decision_tree" | "dt" => ModelKind::DecisionTree,
            "random_forest" | "rf" => ModelKind::RandomForest,
            "gradient_boosted_trees" | "xgb" | "gbt" => ModelKind::GradientBoostedTrees,
            "mlp" | "nn" => ModelKind::Mlp,
            other => return Err(Error::ModelSpec(format!("unknown model kind {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseMode {
    #[default]
    None,
    Defended,
}

/// A hyperparameter value: a number or a word such as `gini` or `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Number(f64),
    Text(String),
}

impl HyperValue {
    pub fn none() -> Self {
        HyperValue::Text("None".into())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, HyperValue::Text(t) if t.eq_ignore_ascii_case("none"))
    }
}

impl From<f64> for HyperValue {
    fn from(v: f64) -> Self {
        HyperValue::Number(v)
    }
}

impl From<usize> for HyperValue {
    fn from(v: usize) -> Self {
        HyperValue::Number(v as f64)
    }
}

impl From<&str> for HyperValue {
    fn from(v: &str) -> Self {
        HyperValue::Text(v.to_string())
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Number(v) => write!(f, "{v}"),
            HyperValue::Text(t) => f.write_str(t),
        }
    }
}

/// What to train: model kind, hyperparameters, defense mode and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, HyperValue>,
    #[serde(default)]
    pub defense_mode: DefenseMode,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            hyperparameters: BTreeMap::new(),
            defense_mode: DefenseMode::None,
            seed: 0,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<HyperValue>) -> Self {
        self.hyperparameters.insert(name.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn defended(mut self) -> Self {
        self.defense_mode = DefenseMode::Defended;
        self
    }

    /// Reject hyperparameter names the kind does not understand.
    pub fn validate(&self) -> Result<()> {
        let allowed = self.kind.allowed_hyperparameters();
        for name in self.hyperparameters.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::ModelSpec(format!(
                    "{} does not accept hyperparameter {name:?}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn params(&self) -> Params<'_> {
        Params { spec: self }
    }

    /// Compact `name=value` rendering used in reports.
    pub fn describe(&self) -> String {
        let hp: Vec<String> = self
            .hyperparameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}({})", self.kind, hp.join(", "))
    }
}

/// Typed access to a spec's hyperparameters.
pub(crate) struct Params<'a> {
    spec: &'a ModelSpec,
}

impl Params<'_> {
    fn raw(&self, name: &str) -> Option<&HyperValue> {
        self.spec.hyperparameters.get(name)
    }

    pub fn f64(&self, name: &str, default: f64) -> Result<f64> {
        match self.raw(name) {
            None => Ok(default),
            Some(HyperValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(HyperValue::Text(t)) => t
                .parse::<f64>()
                .map_err(|_| self.bad(name, "a number")),
            Some(_) => Err(self.bad(name, "a finite number")),
        }
    }

    pub fn usize(&self, name: &str, default: usize) -> Result<usize> {
        let v = self.f64(name, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(self.bad(name, "a non-negative integer"));
        }
        Ok(v as usize)
    }

    /// Integer or `None`.
    pub fn opt_usize(&self, name: &str, default: Option<usize>) -> Result<Option<usize>> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) if v.is_none() => Ok(None),
            Some(_) => self.usize(name, 0).map(Some),
        }
    }

    /// Number or `None`.
    pub fn opt_f64(&self, name: &str, default: Option<f64>) -> Result<Option<f64>> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) if v.is_none() => Ok(None),
            Some(_) => self.f64(name, 0.0).map(Some),
        }
    }

    pub fn text(&self, name: &str, default: &str) -> Result<String> {
        match self.raw(name) {
            None => Ok(default.to_string()),
            Some(HyperValue::Text(t)) => Ok(t.to_ascii_lowercase()),
            Some(HyperValue::Number(_)) => Err(self.bad(name, "a word")),
        }
    }

    fn bad(&self, name: &str, what: &str) -> Error {
        Error::ModelSpec(format!(
            "{}: hyperparameter {name:?} must be {what}",
            self.spec.kind
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_hyperparameter_rejected() {
        let s = ModelSpec::new(ModelKind::NaiveBayes).with("max_depth", 3usize);
        assert!(s.validate().is_err());
        let s = ModelSpec::new(ModelKind::NaiveBayes).with("var_smoothing", 1e-9);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("xgb".parse::<ModelKind>().unwrap(), ModelKind::GradientBoostedTrees);
        assert_eq!("mlp".parse::<ModelKind>().unwrap(), ModelKind::Mlp);
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn typed_params() {
        let s = ModelSpec::new(ModelKind::DecisionTree)
            .with("max_depth", HyperValue::none())
            .with("min_samples_leaf", 2usize)
            .with("criterion", "Gini");
        let p = s.params();
        assert_eq!(p.opt_usize("max_depth", Some(3)).unwrap(), None);
        assert_eq!(p.usize("min_samples_leaf", 1).unwrap(), 2);
        assert_eq!(p.text("criterion", "entropy").unwrap(), "gini");
        assert!(p.usize("criterion", 1).is_err());
    }

    #[test]
    fn serde_shape() {
        let s = ModelSpec::new(ModelKind::RandomForest)
            .with("max_features", HyperValue::none())
            .with("n_estimators", 100usize);
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"random_forest\""));
        let back: ModelSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
