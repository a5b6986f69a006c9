use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// The population / target-train / target-test split plus the balanced
/// inference set drawn from the target splits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPartition {
    pub seed: u64,
    pub n_rows: usize,
    pub population: Vec<usize>,
    pub target_train: Vec<usize>,
    pub target_test: Vec<usize>,
    pub inference_members: Vec<usize>,
    pub inference_nonmembers: Vec<usize>,
}

/// Smallest dataset that can be partitioned.
pub const MIN_PARTITION_ROWS: usize = 8;

/// Split a dataset by the population/train/test protocol.
///
/// Half the rows (floor) go to the population; the rest is split 75/25 into
/// target train and target test with the test size floored. The inference
/// set takes `m = min(ceil(0.25 * |train|), |test|)` members from the train
/// split and `m` non-members from the test split.
pub fn make_partition(ds: &Dataset, seed: u64) -> Result<DataPartition> {
    partition_rows(ds.len(), seed)
}

pub fn partition_rows(n: usize, seed: u64) -> Result<DataPartition> {
    if n < MIN_PARTITION_ROWS {
        return Err(Error::Partition(format!(
            "need at least {MIN_PARTITION_ROWS} rows, dataset has {n}"
        )));
    }
    let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stage::PARTITION]));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_population = n / 2;
    let rest = n - n_population;
    let n_test = rest / 4;
    let n_train = rest - n_test;
    let population = order[..n_population].to_vec();
    let target_train = order[n_population..n_population + n_train].to_vec();
    let target_test = order[n_population + n_train..].to_vec();

    let m = n_train.div_ceil(4).min(n_test);
    let mut members = target_train.clone();
    members.shuffle(&mut rng);
    members.truncate(m);
    let mut nonmembers = target_test.clone();
    nonmembers.shuffle(&mut rng);
    nonmembers.truncate(m);

    Ok(DataPartition {
        seed,
        n_rows: n,
        population,
        target_train,
        target_test,
        inference_members: members,
        inference_nonmembers: nonmembers,
    })
}

impl DataPartition {
    /// Inference records in scoring order: members first, then non-members.
    pub fn inference_set(&self) -> Vec<usize> {
        let mut v = self.inference_members.clone();
        v.extend_from_slice(&self.inference_nonmembers);
        v
    }

    /// Ground-truth membership bits aligned with [`Self::inference_set`].
    pub fn inference_truth(&self) -> Vec<bool> {
        let mut v = vec![true; self.inference_members.len()];
        v.extend(std::iter::repeat(false).take(self.inference_nonmembers.len()));
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: DataPartition = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Check every structural invariant of the split.
    pub fn validate(&self) -> Result<()> {
        let mut owner = vec![0u8; self.n_rows];
        for (tag, set) in [
            (1u8, &self.population),
            (2, &self.target_train),
            (3, &self.target_test),
        ] {
            for &i in set {
                if i >= self.n_rows {
                    return Err(Error::Partition(format!("index {i} out of range")));
                }
                if owner[i] != 0 {
                    return Err(Error::Partition(format!("index {i} assigned twice")));
                }
                owner[i] = tag;
            }
        }
        if self.inference_members.len() != self.inference_nonmembers.len() {
            return Err(Error::Partition("inference set is unbalanced".into()));
        }
        let check = |set: &[usize], tag: u8, what: &str| -> Result<()> {
            let mut seen = std::collections::HashSet::new();
            for &i in set {
                if i >= self.n_rows || owner[i] != tag || !seen.insert(i) {
                    return Err(Error::Partition(format!("{what} index {i} invalid")));
                }
            }
            Ok(())
        };
        check(&self.inference_members, 2, "member")?;
        check(&self.inference_nonmembers, 3, "non-member")?;
        Ok(())
    }
}

/// Train and test shards for one federated participant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split the target train and test sets into `n_participants` disjoint,
/// size-balanced shards (sizes differ by at most one, larger shards first).
pub fn make_federated_shards(
    p: &DataPartition,
    n_participants: usize,
    seed: u64,
) -> Result<Vec<Shard>> {
    if n_participants < 1 {
        return Err(Error::Federated("need at least one participant".into()));
    }
    if p.target_train.len() < n_participants {
        return Err(Error::Federated(format!(
            "{} training rows cannot feed {n_participants} participants",
            p.target_train.len()
        )));
    }
    let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stage::SHARDS]));
    let mut train = p.target_train.clone();
    train.shuffle(&mut rng);
    let mut test = p.target_test.clone();
    test.shuffle(&mut rng);
    let trains = split_balanced(&train, n_participants);
    let tests = split_balanced(&test, n_participants);
    Ok(trains
        .into_iter()
        .zip(tests)
        .map(|(train, test)| Shard { train, test })
        .collect())
}

pub(crate) fn split_balanced(items: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_rows_split_sizes() {
        let p = partition_rows(1000, 3).unwrap();
        assert_eq!(p.population.len(), 500);
        assert_eq!(p.target_train.len(), 375);
        assert_eq!(p.target_test.len(), 125);
        assert_eq!(p.inference_members.len(), 94);
        assert_eq!(p.inference_nonmembers.len(), 94);
        p.validate().unwrap();
    }

    #[test]
    fn smallest_legal_partition() {
        let p = partition_rows(8, 0).unwrap();
        assert_eq!(
            (p.population.len(), p.target_train.len(), p.target_test.len()),
            (4, 3, 1)
        );
        assert_eq!(p.inference_members.len(), 1);
        assert!(partition_rows(7, 0).is_err());
    }

    #[test]
    fn partition_is_deterministic() {
        assert_eq!(partition_rows(100, 9).unwrap(), partition_rows(100, 9).unwrap());
        assert_ne!(partition_rows(100, 9).unwrap(), partition_rows(100, 10).unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let p = partition_rows(40, 1).unwrap();
        assert_eq!(DataPartition::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn shard_sizes_balance_remainder() {
        let mut p = partition_rows(40, 1).unwrap();
        p.target_train = (0..10).collect();
        let shards = make_federated_shards(&p, 3, 0).unwrap();
        let sizes: Vec<_> = shards.iter().map(|s| s.train.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        p.target_train = (0..9).collect();
        let shards = make_federated_shards(&p, 3, 0).unwrap();
        assert!(shards.iter().all(|s| s.train.len() == 3));
        assert!(make_federated_shards(&p, 0, 0).is_err());
        assert!(make_federated_shards(&p, 10, 0).is_err());
    }
}
