use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::boosting::GradientBoosting;
use super::cart::{DecisionTree, RandomForest};
use super::logistic::LogisticRegression;
use super::mlp::Mlp;
use super::naive_bayes::NaiveBayes;
use super::spec::{ModelKind, ModelSpec};
use crate::data::{Cell, Dataset, EncodedMatrix, Encoder};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const FORMAT_NAME: &str = "tabmia-model";
const FORMAT_VERSION: u32 = 1;

/// Learned parameters of one of the supported model kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Classifier {
    NaiveBayes(NaiveBayes),
    LogisticRegression(LogisticRegression),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    GradientBoostedTrees(GradientBoosting),
    Mlp(Mlp),
}

impl Classifier {
    fn fit(spec: &ModelSpec, data: &EncodedMatrix, eval: Option<&EncodedMatrix>) -> Result<Self> {
        Ok(match spec.kind {
            ModelKind::NaiveBayes => Classifier::NaiveBayes(NaiveBayes::fit(spec, data)?),
            ModelKind::LogisticRegression => {
                Classifier::LogisticRegression(LogisticRegression::fit(spec, data)?)
            }
            ModelKind::DecisionTree => Classifier::DecisionTree(DecisionTree::fit(spec, data)?),
            ModelKind::RandomForest => Classifier::RandomForest(RandomForest::fit(spec, data)?),
            ModelKind::GradientBoostedTrees => {
                Classifier::GradientBoostedTrees(GradientBoosting::fit(spec, data, eval)?)
            }
            ModelKind::Mlp => Classifier::Mlp(Mlp::fit(spec, data)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::NaiveBayes(_) => ModelKind::NaiveBayes,
            Classifier::LogisticRegression(_) => ModelKind::LogisticRegression,
            Classifier::DecisionTree(_) => ModelKind::DecisionTree,
            Classifier::RandomForest(_) => ModelKind::RandomForest,
            Classifier::GradientBoostedTrees(_) => ModelKind::GradientBoostedTrees,
            Classifier::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Classifier::NaiveBayes(m) => m.predict_into(x, out),
            Classifier::LogisticRegression(m) => m.predict_into(x, out),
            Classifier::DecisionTree(m) => m.predict_into(x, out),
            Classifier::RandomForest(m) => m.predict_into(x, out),
            Classifier::GradientBoostedTrees(m) => m.predict_into(x, out),
            Classifier::Mlp(m) => m.predict_into(x, out),
        }
    }
}

/// Anything that answers probability queries for raw records. Attacks only
/// ever see a target through this trait.
pub trait BlackBox: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Probability vector for one full-width record (the label cell is ignored).
    fn predict_proba(&self, row: &[Cell]) -> Result<Vec<f64>>;

    /// Most probable class; ties go to the lowest index.
    fn predict_label(&self, row: &[Cell]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    /// One probability row per entry of `rows`.
    fn predict_many(&self, ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
        let mut out = Matrix::zeros(rows.len(), self.n_classes());
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).copy_from_slice(&self.predict_proba(ds.row(i))?);
        }
        Ok(out)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// A fitted model together with the encoder that maps raw records onto its
/// feature space. Immutable after training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: ModelSpec,
    encoder: Encoder,
    n_classes: usize,
    classifier: Classifier,
    #[serde(skip)]
    black_box: bool,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    black_box: bool,
    #[serde(flatten)]
    model: TrainedModel,
}

impl TrainedModel {
    pub(crate) fn from_parts(spec: ModelSpec, encoder: Encoder, n_classes: usize, classifier: Classifier) -> Self {
        Self {
            spec,
            encoder,
            n_classes,
            classifier,
            black_box: false,
        }
    }

    /// The specification that reproduces this model. For early-stopped
    /// boosting this records the number of rounds actually kept.
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Learned parameters, unless the model was exported as black-box only.
    pub fn classifier(&self) -> Option<&Classifier> {
        (!self.black_box).then_some(&self.classifier)
    }

    pub fn is_black_box(&self) -> bool {
        self.black_box
    }

    pub(crate) fn into_black_box(mut self) -> Self {
        self.black_box = true;
        self
    }

    /// Fraction of rows whose argmax prediction equals the label.
    pub fn accuracy(&self, data: &EncodedMatrix) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut p = vec![0.0; self.n_classes];
        let correct = (0..data.len())
            .filter(|&i| {
                self.classifier.predict_into(data.x.row(i), &mut p);
                argmax(&p) == data.labels[i]
            })
            .count();
        correct as f64 / data.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            black_box: self.black_box,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&env)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != FORMAT_NAME || env.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "expected {FORMAT_NAME} v{FORMAT_VERSION}, found {} v{}",
                env.format, env.version
            )));
        }
        let mut model = env.model;
        model.black_box = env.black_box;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl BlackBox for TrainedModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, row: &[Cell]) -> Result<Vec<f64>> {
        let x = self.encoder.encode_row(row)?;
        let mut out = vec![0.0; self.n_classes];
        self.classifier.predict_into(&x, &mut out);
        Ok(out)
    }

    fn predict_many(&self, ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
        let mut x = vec![0.0; self.encoder.width()];
        let mut out = Matrix::zeros(rows.len(), self.n_classes);
        for (r, &i) in rows.iter().enumerate() {
            self.encoder.encode_row_into(ds.row(i), &mut x)?;
            self.classifier.predict_into(&x, out.row_mut(r));
        }
        Ok(out)
    }
}

fn check_trainable(ds: &Dataset, rows: &[usize]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let first = ds.label(rows[0]);
    if rows.iter().all(|&i| ds.label(i) == first) {
        return Err(Error::Training(
            "training rows contain a single class".into(),
        ));
    }
    Ok(())
}

/// Fit `spec` on `rows` of `ds`. The encoder is fitted on the same rows.
pub fn train_model(ds: &Dataset, rows: &[usize], spec: &ModelSpec) -> Result<TrainedModel> {
    train_model_with_validation(ds, rows, None, spec)
}

/// Like [`train_model`], with validation rows for boosting early stopping.
/// The returned spec pins the number of rounds that were kept.
pub fn train_model_with_validation(
    ds: &Dataset,
    rows: &[usize],
    validation: Option<&[usize]>,
    spec: &ModelSpec,
) -> Result<TrainedModel> {
    spec.validate()?;
    check_trainable(ds, rows)?;
    let encoder = Encoder::fit(ds, rows)?;
    let data = encoder.transform(ds, rows)?;
    let eval = validation.map(|v| encoder.transform(ds, v)).transpose()?;
    let (spec, classifier) = fit_encoded(spec, &data, eval.as_ref())?;
    Ok(TrainedModel::from_parts(spec, encoder, ds.n_classes(), classifier))
}

/// Fit on an already-encoded matrix; returns the effective spec.
pub(crate) fn fit_encoded(
    spec: &ModelSpec,
    data: &EncodedMatrix,
    eval: Option<&EncodedMatrix>,
) -> Result<(ModelSpec, Classifier)> {
    let classifier = Classifier::fit(spec, data, eval)?;
    let mut spec = spec.clone();
    if let Classifier::GradientBoostedTrees(g) = &classifier {
        if spec.hyperparameters.contains_key("early_stopping_rounds") && eval.is_some() {
            spec.hyperparameters.remove("early_stopping_rounds");
            spec = spec.with("n_estimators", g.n_rounds());
        }
    }
    Ok((spec, classifier))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::membership_benchmark;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn single_class_rejected() {
        let ds = membership_benchmark(40, 1).unwrap();
        let rows: Vec<usize> = (0..40).filter(|&i| ds.label(i) == 0).collect();
        let err = train_model(&ds, &rows, &ModelSpec::new(ModelKind::NaiveBayes));
        assert!(matches!(err, Err(Error::Training(_))));
    }

    #[test]
    fn save_load_round_trip_for_every_kind() {
        let ds = membership_benchmark(80, 2).unwrap();
        let rows: Vec<usize> = (0..60).collect();
        for kind in ModelKind::ALL {
            let spec = match kind {
                ModelKind::Mlp => ModelSpec::new(kind).with("epochs", 3usize),
                ModelKind::RandomForest => ModelSpec::new(kind).with("n_estimators", 5usize),
                _ => ModelSpec::new(kind),
            };
            let m = train_model(&ds, &rows, &spec).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            for i in 60..80 {
                assert_eq!(
                    m.predict_proba(ds.row(i)).unwrap(),
                    back.predict_proba(ds.row(i)).unwrap()
                );
            }
        }
    }

    #[test]
    fn black_box_flag_survives_persistence() {
        let ds = membership_benchmark(50, 3).unwrap();
        let rows: Vec<usize> = (0..50).collect();
        let m = train_model(&ds, &rows, &ModelSpec::new(ModelKind::NaiveBayes))
            .unwrap()
            .into_black_box();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert!(back.classifier().is_none());
    }

    #[test]
    fn wrong_format_rejected() {
        let ds = membership_benchmark(30, 4).unwrap();
        let rows: Vec<usize> = (0..30).collect();
        let m = train_model(&ds, &rows, &ModelSpec::new(ModelKind::NaiveBayes)).unwrap();
        let text = m.to_json().unwrap().replace("tabmia-model", "other");
        assert!(matches!(TrainedModel::from_json(&text), Err(Error::Format(_))));
    }
}
