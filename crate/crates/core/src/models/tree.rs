//! Level-wise tree growing shared by CART trees, random forests and
//! gradient boosting.
//!
//! Each feature is sorted once per fit. A level of the tree is grown with one
//! pass over every sorted feature column: rows carry the id of the node they
//! currently sit in, and every open node keeps a running accumulator of the
//! statistics to the left of the scan position. The cost per level is
//! `O(rows * features)` regardless of how many nodes are open.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

const NO_NODE: u32 = u32::MAX;

/// Row orderings by feature value, computed once per training matrix.
pub(crate) struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j)
                        .total_cmp(&x.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }
}

/// Node statistics and split scoring for one kind of tree.
pub(crate) trait SplitObjective {
    /// Number of `f64` accumulators per node.
    fn width(&self) -> usize;
    /// Add row `row` (with multiplicity `weight`) into `acc`.
    fn accumulate(&self, acc: &mut [f64], row: usize, weight: f64);
    /// Whether a node with these totals may be split at all.
    fn splittable(&self, total: &[f64]) -> bool;
    /// Score for splitting `total` into `left` and `total - left`, or `None`
    /// when the split violates a constraint.
    fn gain(&self, left: &[f64], total: &[f64], scratch: &mut [f64]) -> Option<f64>;
}

/// How many features each node may consider.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum FeatureSampling {
    All,
    /// Draw this many features per node.
    PerNode(usize),
}

pub(crate) struct GrowConfig<'a> {
    pub max_depth: Option<usize>,
    /// Features available to the whole tree (column subsampling).
    pub features: &'a [usize],
    pub sampling: FeatureSampling,
}

#[derive(Clone, Debug)]
pub(crate) struct RawNode {
    pub stats: Vec<f64>,
    pub split: Option<(usize, f64, usize, usize)>,
}

pub(crate) struct GrownTree {
    pub nodes: Vec<RawNode>,
}

/// Grow one tree over the rows with positive `weights`.
pub(crate) fn grow<O: SplitObjective>(
    x: &Matrix,
    sorted: &SortedColumns,
    weights: &[f64],
    objective: &O,
    cfg: &GrowConfig<'_>,
    rng: &mut ChaCha8Rng,
) -> GrownTree {
    let n = x.rows();
    let w = objective.width();
    let mut row_node = vec![NO_NODE; n];
    let mut root = vec![0.0; w];
    for r in 0..n {
        if weights[r] > 0.0 {
            row_node[r] = 0;
            objective.accumulate(&mut root, r, weights[r]);
        }
    }
    let mut nodes = vec![RawNode {
        stats: root,
        split: None,
    }];
    let mut frontier = vec![0usize];
    let mut depth = 0usize;
    let mut slot_of: Vec<u32> = vec![NO_NODE; 1];
    let n_features = x.cols();
    let mut scratch = vec![0.0; w];

    while !frontier.is_empty() {
        if cfg.max_depth.is_some_and(|d| depth >= d) {
            break;
        }
        slot_of.resize(nodes.len(), NO_NODE);
        let mut open = Vec::new();
        for &id in &frontier {
            if objective.splittable(&nodes[id].stats) {
                slot_of[id] = open.len() as u32;
                open.push(id);
            }
        }
        if open.is_empty() {
            break;
        }
        let allowed: Option<Vec<bool>> = match cfg.sampling {
            FeatureSampling::All => None,
            FeatureSampling::PerNode(k) => {
                let mut mask = vec![false; open.len() * n_features];
                let mut pool = cfg.features.to_vec();
                for s in 0..open.len() {
                    let (picked, _) = pool.partial_shuffle(rng, k.min(cfg.features.len()));
                    for &f in picked.iter() {
                        mask[s * n_features + f] = true;
                    }
                }
                Some(mask)
            }
        };

        let slots = open.len();
        let mut best_gain = vec![f64::NEG_INFINITY; slots];
        let mut best_split: Vec<Option<(usize, f64)>> = vec![None; slots];
        let mut best_left = vec![0.0; slots * w];
        let mut acc = vec![0.0; slots * w];
        let mut last = vec![0.0f64; slots];
        let mut seen = vec![false; slots];

        for &f in cfg.features {
            acc.fill(0.0);
            seen.fill(false);
            for &r in &sorted.order[f] {
                let r = r as usize;
                let node = row_node[r];
                if node == NO_NODE {
                    continue;
                }
                let s = slot_of[node as usize];
                if s == NO_NODE {
                    continue;
                }
                let s = s as usize;
                let v = x.get(r, f);
                let acc_s = &mut acc[s * w..(s + 1) * w];
                if seen[s] && v > last[s] && allowed.as_ref().map_or(true, |m| m[s * n_features + f])
                {
                    let total = &nodes[open[s]].stats;
                    if let Some(g) = objective.gain(acc_s, total, &mut scratch) {
                        if g > best_gain[s] {
                            best_gain[s] = g;
                            let mut thr = 0.5 * (last[s] + v);
                            if thr >= v {
                                thr = last[s];
                            }
                            best_split[s] = Some((f, thr));
                            best_left[s * w..(s + 1) * w].copy_from_slice(acc_s);
                        }
                    }
                }
                objective.accumulate(acc_s, r, weights[r]);
                last[s] = v;
                seen[s] = true;
            }
        }

        let mut next = Vec::new();
        let mut split_of_slot: Vec<Option<(usize, f64, u32, u32)>> = vec![None; slots];
        for s in 0..slots {
            if let Some((f, thr)) = best_split[s] {
                let id = open[s];
                let left_stats = best_left[s * w..(s + 1) * w].to_vec();
                let right_stats: Vec<f64> = nodes[id]
                    .stats
                    .iter()
                    .zip(&left_stats)
                    .map(|(t, l)| t - l)
                    .collect();
                let l = nodes.len();
                nodes.push(RawNode {
                    stats: left_stats,
                    split: None,
                });
                nodes.push(RawNode {
                    stats: right_stats,
                    split: None,
                });
                nodes[id].split = Some((f, thr, l, l + 1));
                split_of_slot[s] = Some((f, thr, l as u32, l as u32 + 1));
                next.push(l);
                next.push(l + 1);
            }
        }
        for r in 0..n {
            let node = row_node[r];
            if node == NO_NODE {
                continue;
            }
            let s = slot_of[node as usize];
            if s == NO_NODE {
                continue;
            }
            if let Some((f, thr, l, rr)) = split_of_slot[s as usize] {
                row_node[r] = if x.get(r, f) <= thr { l } else { rr };
            }
        }
        for &id in &open {
            slot_of[id] = NO_NODE;
        }
        frontier = next;
        depth += 1;
    }

    GrownTree { nodes }
}

/// A fitted binary tree with leaf payloads of type `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<V> {
    nodes: Vec<TreeNode>,
    leaves: Vec<V>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(u32),
}

impl<V> Tree<V> {
    /// Convert a grown tree, mapping node statistics to leaf payloads.
    pub(crate) fn from_grown(grown: &[RawNode], mut leaf: impl FnMut(&[f64]) -> V) -> Self {
        let mut nodes = Vec::with_capacity(grown.len());
        let mut leaves = Vec::new();
        // Renumber reachable nodes in depth-first order.
        fn visit<V>(
            id: usize,
            grown: &[RawNode],
            nodes: &mut Vec<TreeNode>,
            leaves: &mut Vec<V>,
            leaf: &mut dyn FnMut(&[f64]) -> V,
        ) -> u32 {
            let me = nodes.len();
            nodes.push(TreeNode::Leaf(0));
            match grown[id].split {
                Some((f, thr, l, r)) => {
                    let left = visit(l, grown, nodes, leaves, leaf);
                    let right = visit(r, grown, nodes, leaves, leaf);
                    nodes[me] = TreeNode::Split {
                        feature: f as u32,
                        threshold: thr,
                        left,
                        right,
                    };
                }
                None => {
                    leaves.push(leaf(&grown[id].stats));
                    nodes[me] = TreeNode::Leaf(leaves.len() as u32 - 1);
                }
            }
            me as u32
        }
        visit(0, grown, &mut nodes, &mut leaves, &mut leaf);
        Self { nodes, leaves }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
                TreeNode::Leaf(k) => return k as usize,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &V {
        &self.leaves[self.leaf_index(x)]
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    1 + d(nodes, left as usize).max(d(nodes, right as usize))
                }
                TreeNode::Leaf(_) => 0,
            }
        }
        d(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    pub(crate) fn impurity(&self, counts: &[f64]) -> f64 {
        let n: f64 = counts.iter().sum();
        if n <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|c| (c / n) * (c / n).log2())
                .sum::<f64>(),
        }
    }
}

/// CART classification objective over weighted class counts.
pub(crate) struct ClassCounts<'a> {
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub criterion: Criterion,
    pub min_samples_split: f64,
    pub min_samples_leaf: f64,
}

impl SplitObjective for ClassCounts<'_> {
    fn width(&self) -> usize {
        self.n_classes
    }

    fn accumulate(&self, acc: &mut [f64], row: usize, weight: f64) {
        acc[self.labels[row]] += weight;
    }

    fn splittable(&self, total: &[f64]) -> bool {
        let n: f64 = total.iter().sum();
        n >= self.min_samples_split && n >= 2.0 * self.min_samples_leaf && {
            let nonzero = total.iter().filter(|&&c| c > 0.0).count();
            nonzero > 1
        }
    }

    fn gain(&self, left: &[f64], total: &[f64], right: &mut [f64]) -> Option<f64> {
        let nl: f64 = left.iter().sum();
        let n: f64 = total.iter().sum();
        let nr = n - nl;
        if nl < self.min_samples_leaf || nr < self.min_samples_leaf {
            return None;
        }
        for ((r, t), l) in right.iter_mut().zip(total).zip(left) {
            *r = t - l;
        }
        let parent = n * self.criterion.impurity(total);
        Some(parent - nl * self.criterion.impurity(left) - nr * self.criterion.impurity(right))
    }
}

/// Collapse subtrees by minimal cost-complexity pruning until every internal
/// node's effective alpha exceeds `alpha`.
///
/// Node risk is `(n_t / n_root) * impurity(t)`.
pub(crate) fn prune_cost_complexity(nodes: &mut [RawNode], criterion: Criterion, alpha: f64) {
    if alpha <= 0.0 {
        return;
    }
    let n_root: f64 = nodes[0].stats.iter().sum();
    if n_root <= 0.0 {
        return;
    }
    let risk = |s: &[f64]| s.iter().sum::<f64>() / n_root * criterion.impurity(s);
    loop {
        // (subtree risk, leaf count) for each node, children before parents.
        let mut sub = vec![(0.0, 0usize); nodes.len()];
        let mut order = Vec::with_capacity(nodes.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            order.push(i);
            if let Some((_, _, l, r)) = nodes[i].split {
                stack.push(l);
                stack.push(r);
            }
        }
        let mut weakest: Option<(f64, usize)> = None;
        for &i in order.iter().rev() {
            match nodes[i].split {
                None => sub[i] = (risk(&nodes[i].stats), 1),
                Some((_, _, l, r)) => {
                    sub[i] = (sub[l].0 + sub[r].0, sub[l].1 + sub[r].1);
                    let g = (risk(&nodes[i].stats) - sub[i].0) / (sub[i].1 as f64 - 1.0);
                    if weakest.map_or(true, |(wg, _)| g < wg) {
                        weakest = Some((g, i));
                    }
                }
            }
        }
        match weakest {
            Some((g, i)) if g <= alpha => nodes[i].split = None,
            _ => break,
        }
    }
}

/// Choose `k` of `n` features without replacement.
pub(crate) fn sample_features(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = ((fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let mut all: Vec<usize> = (0..n).collect();
    if k < n {
        all.shuffle(rng);
        all.truncate(k);
        all.sort_unstable();
    }
    all
}

/// Bernoulli row subsample; at least one row is kept.
pub(crate) fn subsample_rows(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if rate >= 1.0 {
        return vec![1.0; n];
    }
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 1.0 } else { 0.0 })
        .collect();
    if n > 0 && w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    w
}
