//! Membership-inference auditing for tabular classifiers.
//!
//! The crate trains target models on a partition of a tabular dataset,
//! attacks them with ten black-box membership-inference attacks, and scores
//! the attacks with ROC-based metrics. Everything is seeded, so a config plus
//! a master seed reproduces a report byte for byte.
//!
//! * [`data`]: CSV loading, schema, encoding, partitions, single-outs.
//! * [`models`]: naive Bayes, logistic regression, decision tree, random
//!   forest, gradient-boosted trees, MLP, and hyper-parameter grids.
//! * [`federated`]: in-process FedAvg and cyclic boosting.
//! * [`attacks`]: shadow-model, LiRA, RMIA and metric attacks, plus the
//!   surrogate transfer matrix.
//! * [`eval`]: AUC, ROC, TPR at fixed FPR, advantage, bootstrap intervals.
//! * [`audit`]: config-driven runs and the report files behind the `tabmia`
//!   binary.
//!
//! ```
//! use tabmia::attacks::{run_attack, AttackContext, AttackFamily, AttackSpec};
//! use tabmia::data::{make_partition, synthetic::membership_benchmark};
//! use tabmia::eval::roc_auc;
//! use tabmia::models::{train_model, ModelKind, ModelSpec};
//!
//! let ds = membership_benchmark(400, 1)?;
//! let part = make_partition(&ds, 1)?;
//! let spec = ModelSpec::new(ModelKind::DecisionTree).with_seed(1);
//! let target = train_model(&ds, &part.target_train, &spec)?;
//! let mut ctx = AttackContext::new(&ds, &part, &target, spec, 500, 1)?;
//! let result = run_attack(&mut ctx, &AttackSpec::new(AttackFamily::MetricLoss))?;
//! let (_curve, auc) = roc_auc(&result)?;
//! assert!((0.0..=1.0).contains(&auc));
//! # Ok::<(), tabmia::Error>(())
//! ```

pub mod attacks;
pub mod audit;
pub mod data;
pub mod error;
pub mod eval;
pub mod federated;
pub mod matrix;
pub mod models;
pub mod seed;

pub use attacks::{run_attack, AttackContext, AttackFamily, AttackResult, AttackSpec};
pub use data::{DataPartition, Dataset};
pub use error::{Error, Result};
pub use models::{train_model, BlackBox, ModelKind, ModelSpec, TrainedModel};
