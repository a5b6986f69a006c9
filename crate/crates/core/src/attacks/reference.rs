use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AttackContext;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{train_model, BlackBox, ModelKind};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Models trained on random halves of population plus inference set.
    Online,
    /// Models trained on population rows only.
    Offline,
}

/// One reference model, kept only through its answers on the rows the
/// attacks need.
#[derive(Clone, Debug)]
pub struct ReferenceModel {
    pub train_rows: Vec<usize>,
    /// Whether each inference query was in this model's training set.
    pub query_in: Vec<bool>,
    /// Probabilities on the inference queries.
    pub query_proba: Matrix,
    /// Probabilities on the context's population sample.
    pub population_proba: Matrix,
}

#[derive(Clone, Debug)]
pub struct ReferencePool {
    pub mode: PoolMode,
    pub kind: ModelKind,
    pub models: Vec<ReferenceModel>,
}

impl ReferencePool {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// (IN, OUT) model counts for inference query `q`.
    pub fn in_out_counts(&self, q: usize) -> (usize, usize) {
        let n_in = self.models.iter().filter(|m| m.query_in[q]).count();
        (n_in, self.models.len() - n_in)
    }
}

fn training_sets(ctx: &AttackContext, mode: PoolMode, n_models: usize, seed: u64) -> Vec<Vec<usize>> {
    let part = ctx.partition;
    let mut sets = Vec::with_capacity(n_models);
    match mode {
        PoolMode::Online => {
            let mut universe: Vec<usize> = part.population.clone();
            universe.extend(ctx.inference_rows());
            universe.sort_unstable();
            let half = universe.len() / 2;
            // Complementary pairs: every query is IN for exactly one model
            // of each pair.
            for pair in 0..n_models.div_ceil(2) {
                let mut rng = seed::rng(seed::derive_seed(
                    seed,
                    &[seed::stage::REFERENCE, pair as u64],
                ));
                let mut perm = universe.clone();
                perm.shuffle(&mut rng);
                let (a, b) = perm.split_at(half);
                sets.push(a.to_vec());
                if sets.len() < n_models {
                    sets.push(b.to_vec());
                }
            }
        }
        PoolMode::Offline => {
            let size = part.target_train.len().min(part.population.len());
            for i in 0..n_models {
                let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stage::REFERENCE, i as u64]));
                let mut rows = part.population.clone();
                rows.shuffle(&mut rng);
                rows.truncate(size);
                sets.push(rows);
            }
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

/// Train `n_models` reference models of `kind` for the context's target.
///
/// Online pools pair complementary halves of population plus inference set,
/// so each query is IN for exactly half of every pair. Offline pools sample
/// population subsets the size of the target's training set and never touch
/// the inference set.
pub fn train_reference_pool(
    ctx: &AttackContext,
    mode: PoolMode,
    kind: ModelKind,
    n_models: usize,
    seed: u64,
) -> Result<ReferencePool> {
    if n_models < 2 {
        return Err(Error::Attack("a reference pool needs at least two models".into()));
    }
    let sets = training_sets(ctx, mode, n_models, seed);
    let queries = ctx.inference_rows();
    let z_rows = ctx.population_sample();
    let models: Vec<ReferenceModel> = sets
        .into_par_iter()
        .enumerate()
        .map(|(i, rows)| {
            let spec = ctx.adversary_spec(
                kind,
                seed::derive_seed(seed, &[seed::stage::REFERENCE, i as u64, 1]),
            );
            let model = train_model(ctx.ds, &rows, &spec)?;
            let mut member = vec![false; ctx.ds.len()];
            for &r in &rows {
                member[r] = true;
            }
            Ok(ReferenceModel {
                query_in: queries.iter().map(|&q| member[q]).collect(),
                query_proba: model.predict_many(ctx.ds, queries)?,
                population_proba: model.predict_many(ctx.ds, z_rows)?,
                train_rows: rows,
            })
        })
        .collect::<Result<_>>()?;
    let pool = ReferencePool { mode, kind, models };
    match mode {
        PoolMode::Online => {
            if let Some(q) = (0..queries.len()).find(|&q| {
                let (i, o) = pool.in_out_counts(q);
                i == 0 || o == 0
            }) {
                return Err(Error::Attack(format!(
                    "online pool leaves query {} without IN or OUT models",
                    queries[q]
                )));
            }
        }
        PoolMode::Offline => {
            if pool.models.iter().any(|m| m.query_in.iter().any(|&b| b)) {
                return Err(Error::Attack("offline pool touched the inference set".into()));
            }
        }
    }
    Ok(pool)
}
