//! Second-order gradient boosted trees with XGBoost-style regularization:
//! `min_child_weight`, `gamma`, L1 (`reg_alpha`) and L2 (`reg_lambda`) leaf
//! penalties, row subsampling and per-tree column subsampling.

use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use super::tree::{
    grow, sample_features, subsample_rows, FeatureSampling, GrowConfig, SortedColumns,
    SplitObjective, Tree,
};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

const MIN_HESSIAN: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct GbtParams {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub learning_rate: f64,
    pub gamma: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub early_stopping_rounds: Option<usize>,
}

impl GbtParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let p = spec.params();
        let out = Self {
            max_depth: p.usize("max_depth", 6)?,
            n_estimators: p.usize("n_estimators", 100)?,
            min_child_weight: p.f64("min_child_weight", 1.0)?,
            subsample: p.f64("subsample", 1.0)?,
            colsample_bytree: p.f64("colsample_bytree", 1.0)?,
            learning_rate: p.f64("learning_rate", 0.3)?,
            gamma: p.f64("gamma", 0.0)?,
            reg_alpha: p.f64("reg_alpha", 0.0)?,
            reg_lambda: p.f64("reg_lambda", 1.0)?,
            early_stopping_rounds: p.opt_usize("early_stopping_rounds", None)?,
        };
        if !(out.subsample > 0.0 && out.subsample <= 1.0)
            || !(out.colsample_bytree > 0.0 && out.colsample_bytree <= 1.0)
        {
            return Err(Error::ModelSpec(
                "subsample and colsample_bytree must lie in (0, 1]".into(),
            ));
        }
        if out.learning_rate <= 0.0 || out.reg_lambda < 0.0 || out.reg_alpha < 0.0 {
            return Err(Error::ModelSpec(
                "learning_rate must be positive and penalties non-negative".into(),
            ));
        }
        Ok(out)
    }
}

struct GradHess<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

impl GradHess<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let t = soft_threshold(g, self.params.reg_alpha);
        t * t / (h + self.params.reg_lambda)
    }
}

impl SplitObjective for GradHess<'_> {
    fn width(&self) -> usize {
        2
    }

    fn accumulate(&self, acc: &mut [f64], row: usize, weight: f64) {
        acc[0] += weight * self.grad[row];
        acc[1] += weight * self.hess[row];
    }

    fn splittable(&self, total: &[f64]) -> bool {
        total[1] > 0.0 && total[1] >= 2.0 * self.params.min_child_weight
    }

    fn gain(&self, left: &[f64], total: &[f64], _scratch: &mut [f64]) -> Option<f64> {
        let (gl, hl) = (left[0], left[1]);
        let (gr, hr) = (total[0] - gl, total[1] - hl);
        let mcw = self.params.min_child_weight;
        if hl < mcw || hr < mcw {
            return None;
        }
        let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - self.score(total[0], total[1]))
            - self.params.gamma;
        (gain > 0.0).then_some(gain)
    }
}

/// Boosted ensemble. Binary tasks keep one margin; multiclass tasks keep one
/// margin per class with a softmax link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    n_classes: usize,
    base_margin: Vec<f64>,
    /// One entry per boosting round; each holds one tree per margin.
    rounds: Vec<Vec<Tree<f64>>>,
}

impl GradientBoosting {
    fn n_margins(n_classes: usize) -> usize {
        if n_classes == 2 {
            1
        } else {
            n_classes
        }
    }

    /// Empty ensemble predicting the class frequencies of `labels`.
    pub(crate) fn prior(labels: &[usize], n_classes: usize) -> Self {
        Self::prior_from_counts(&class_counts(labels, n_classes))
    }

    pub(crate) fn prior_from_counts(counts: &[f64]) -> Self {
        let n_classes = counts.len();
        let total: f64 = counts.iter().sum();
        let freq: Vec<f64> = counts
            .iter()
            .map(|c| (c / total).clamp(1e-12, 1.0))
            .collect();
        let base_margin = if n_classes == 2 {
            vec![(freq[1] / freq[0]).ln()]
        } else {
            freq.iter().map(|f| f.ln()).collect()
        };
        Self {
            n_classes,
            base_margin,
            rounds: Vec::new(),
        }
    }

    pub(crate) fn fit(
        spec: &ModelSpec,
        data: &EncodedMatrix,
        eval: Option<&EncodedMatrix>,
    ) -> Result<Self> {
        let params = GbtParams::from_spec(spec)?;
        let mut model = Self::prior(&data.labels, data.n_classes);
        let mut booster = Booster::new(&mut model, data);
        let eval = eval.filter(|e| !e.is_empty() && params.early_stopping_rounds.is_some());
        let mut eval_margins = eval.map(|e| booster.model.initial_margins(e.len()));
        let mut best = (f64::INFINITY, 0usize);
        for round in 0..params.n_estimators {
            let seed = seed::derive_seed(spec.seed, &[round as u64]);
            booster.boost_round(&params, seed);
            if let (Some(e), Some(m)) = (eval, eval_margins.as_mut()) {
                booster.model.add_last_round(&e.x, m);
                let loss = booster.model.log_loss_from_margins(m, &e.labels);
                if loss < best.0 - 1e-12 {
                    best = (loss, round + 1);
                } else if round + 1 - best.1 >= params.early_stopping_rounds.unwrap_or(usize::MAX)
                {
                    break;
                }
            }
        }
        if eval_margins.is_some() {
            model.rounds.truncate(best.1);
        }
        Ok(model)
    }

    fn initial_margins(&self, n: usize) -> Matrix {
        let k = self.base_margin.len();
        let mut m = Matrix::zeros(n, k);
        for i in 0..n {
            m.row_mut(i).copy_from_slice(&self.base_margin);
        }
        m
    }

    fn add_last_round(&self, x: &Matrix, margins: &mut Matrix) {
        if let Some(trees) = self.rounds.last() {
            for i in 0..x.rows() {
                let xi = x.row(i);
                let mi = margins.row_mut(i);
                for (k, t) in trees.iter().enumerate() {
                    mi[k] += *t.predict(xi);
                }
            }
        }
    }

    fn margins_to_proba(&self, margins: &[f64], out: &mut [f64]) {
        if self.n_classes == 2 {
            let p1 = sigmoid(margins[0]);
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            softmax(margins, out);
        }
    }

    pub(crate) fn log_loss_from_margins(&self, margins: &Matrix, labels: &[usize]) -> f64 {
        let mut p = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            self.margins_to_proba(margins.row(i), &mut p);
            total -= p[y].max(1e-15).ln();
        }
        total / labels.len().max(1) as f64
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let mut m = self.base_margin.clone();
        for trees in &self.rounds {
            for (k, t) in trees.iter().enumerate() {
                m[k] += *t.predict(x);
            }
        }
        self.margins_to_proba(&m, out);
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }
}

/// Incremental training state: the model plus margins on its training rows.
pub(crate) struct Booster<'a> {
    pub model: &'a mut GradientBoosting,
    data: &'a EncodedMatrix,
    sorted: SortedColumns,
    margins: Matrix,
}

impl<'a> Booster<'a> {
    pub fn new(model: &'a mut GradientBoosting, data: &'a EncodedMatrix) -> Self {
        let mut margins = model.initial_margins(data.len());
        for trees in &model.rounds {
            for i in 0..data.len() {
                for (k, t) in trees.iter().enumerate() {
                    margins.row_mut(i)[k] += *t.predict(data.x.row(i));
                }
            }
        }
        Self {
            sorted: SortedColumns::new(&data.x),
            model,
            data,
            margins,
        }
    }

    /// Append one boosting round fitted to the current residuals.
    pub fn boost_round(&mut self, params: &GbtParams, seed: u64) {
        let n = self.data.len();
        let n_classes = self.model.n_classes;
        let km = GradientBoosting::n_margins(n_classes);
        let mut rng = seed::rng(seed);
        let weights = subsample_rows(n, params.subsample, &mut rng);

        let mut proba = Matrix::zeros(n, n_classes);
        for i in 0..n {
            let (m, p) = (self.margins.row(i).to_vec(), proba.row_mut(i));
            self.model.margins_to_proba(&m, p);
        }
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(km);
        for k in 0..km {
            let class = if km == 1 { 1 } else { k };
            for i in 0..n {
                let p = proba.get(i, class);
                let y = if self.data.labels[i] == class { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
            }
            let features = sample_features(self.data.n_features(), params.colsample_bytree, &mut rng);
            let objective = GradHess {
                grad: &grad,
                hess: &hess,
                params,
            };
            let cfg = GrowConfig {
                max_depth: Some(params.max_depth),
                features: &features,
                sampling: FeatureSampling::All,
            };
            let grown = grow(&self.data.x, &self.sorted, &weights, &objective, &cfg, &mut rng);
            let tree = Tree::from_grown(&grown.nodes, |s| {
                -soft_threshold(s[0], params.reg_alpha) / (s[1] + params.reg_lambda)
                    * params.learning_rate
            });
            for i in 0..n {
                self.margins.row_mut(i)[k] += *tree.predict(self.data.x.row(i));
            }
            trees.push(tree);
        }
        self.model.rounds.push(trees);
    }

    #[cfg(test)]
    fn training_log_loss(&self) -> f64 {
        self.model
            .log_loss_from_margins(&self.margins, &self.data.labels)
    }
}

pub(crate) fn class_counts(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut c = vec![0.0; n_classes];
    for &y in labels {
        c[y] += 1.0;
    }
    c
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(z: &[f64], out: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}
