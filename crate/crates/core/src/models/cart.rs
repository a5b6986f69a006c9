use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use super::tree::{
    grow, prune_cost_complexity, ClassCounts, Criterion, FeatureSampling, GrowConfig,
    SortedColumns, Tree,
};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn per node; `None` uses all.
    pub max_features: Option<f64>,
    pub ccp_alpha: f64,
}

impl TreeParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let p = spec.params();
        let criterion = match p.text("criterion", "gini")?.as_str() {
            "gini" => Criterion::Gini,
            "entropy" | "log_loss" => Criterion::Entropy,
            other => return Err(Error::ModelSpec(format!("unknown criterion {other:?}"))),
        };
        let max_features = p.opt_f64("max_features", None)?;
        if let Some(f) = max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::ModelSpec("max_features must lie in (0, 1]".into()));
            }
        }
        Ok(Self {
            criterion,
            max_depth: p.opt_usize("max_depth", None)?,
            min_samples_split: p.usize("min_samples_split", 2)?.max(2),
            min_samples_leaf: p.usize("min_samples_leaf", 1)?.max(1),
            max_features,
            ccp_alpha: p.f64("ccp_alpha", 0.0)?.max(0.0),
        })
    }

    fn sampling(&self, n_features: usize) -> FeatureSampling {
        match self.max_features {
            None => FeatureSampling::All,
            Some(f) => {
                let k = ((f * n_features as f64).ceil() as usize).clamp(1, n_features.max(1));
                if k >= n_features {
                    FeatureSampling::All
                } else {
                    FeatureSampling::PerNode(k)
                }
            }
        }
    }
}

/// CART classification tree with class-distribution leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    tree: Tree<Vec<f64>>,
    n_classes: usize,
}

impl DecisionTree {
    pub(crate) fn fit(spec: &ModelSpec, data: &EncodedMatrix) -> Result<Self> {
        let params = TreeParams::from_spec(spec)?;
        let sorted = SortedColumns::new(&data.x);
        let weights = vec![1.0; data.len()];
        let mut rng = seed::rng(seed::derive_seed(spec.seed, &[0]));
        Ok(Self::fit_weighted(data, &sorted, &weights, &params, &mut rng))
    }

    pub(crate) fn fit_weighted(
        data: &EncodedMatrix,
        sorted: &SortedColumns,
        weights: &[f64],
        params: &TreeParams,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let objective = ClassCounts {
            labels: &data.labels,
            n_classes: data.n_classes,
            criterion: params.criterion,
            min_samples_split: params.min_samples_split as f64,
            min_samples_leaf: params.min_samples_leaf as f64,
        };
        let features: Vec<usize> = (0..data.n_features()).collect();
        let cfg = GrowConfig {
            max_depth: params.max_depth,
            features: &features,
            sampling: params.sampling(data.n_features()),
        };
        let mut grown = grow(&data.x, sorted, weights, &objective, &cfg, rng);
        prune_cost_complexity(&mut grown.nodes, params.criterion, params.ccp_alpha);
        let tree = Tree::from_grown(&grown.nodes, |counts| {
            let n: f64 = counts.iter().sum();
            if n > 0.0 {
                counts.iter().map(|c| c / n).collect()
            } else {
                vec![1.0 / counts.len() as f64; counts.len()]
            }
        });
        Self {
            tree,
            n_classes: data.n_classes,
        }
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.tree.predict(x));
    }

    pub fn n_leaves(&self) -> usize {
        self.tree.n_leaves()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }
}

/// Bagged CART trees with soft voting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    pub(crate) fn fit(spec: &ModelSpec, data: &EncodedMatrix) -> Result<Self> {
        let params = TreeParams::from_spec(spec)?;
        let n_estimators = spec.params().usize("n_estimators", 100)?;
        if n_estimators == 0 {
            return Err(Error::ModelSpec("random forest needs n_estimators >= 1".into()));
        }
        let sorted = SortedColumns::new(&data.x);
        let n = data.len();
        let trees = (0..n_estimators)
            .map(|t| {
                let mut rng = seed::rng(seed::derive_seed(spec.seed, &[t as u64]));
                let mut weights = vec![0.0; n];
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
                DecisionTree::fit_weighted(data, &sorted, &weights, &params, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            n_classes: data.n_classes,
        })
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.tree.predict(x)) {
                *o += p;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
