//! Model zoo: naive Bayes, CART, random forest, gradient boosted trees,
//! logistic regression and a small MLP, all behind one training entry point.

mod boosting;
mod cart;
mod grid;
mod logistic;
mod mlp;
mod naive_bayes;
mod spec;
mod trained;
mod tree;

pub use boosting::GradientBoosting;
pub use cart::{DecisionTree, RandomForest};
pub use grid::{
    generalization_gap, grid_search, GeneralizationReport, GridRegime, GridSearchOutcome,
    HyperGrid,
};
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use naive_bayes::NaiveBayes;
pub use spec::{DefenseMode, HyperValue, ModelKind, ModelSpec};
pub use trained::{
    argmax, train_model, train_model_with_validation, BlackBox, Classifier, TrainedModel,
};
pub use tree::{Criterion, Tree};

pub(crate) use boosting::{Booster, GbtParams};
pub(crate) use mlp::MlpParams;
