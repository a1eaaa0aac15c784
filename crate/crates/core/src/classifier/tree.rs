use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierError, Dataset, Distribution};
use crate::pipeline::{FeatureVector, N_FEATURES};
use crate::tech::Technology;

pub const DEFAULT_MIN_LEAF: usize = 5;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Upper bound on internal nodes.
    pub max_splits: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Feature columns the tree may split on; `None` allows all.
    pub features: Option<Vec<usize>>,
}

impl TreeParams {
    pub fn with_splits(max_splits: usize) -> Self {
        TreeParams {
            max_splits,
            max_depth: None,
            min_leaf: DEFAULT_MIN_LEAF,
            features: None,
        }
    }

    pub(crate) fn allowed_features(&self) -> Vec<usize> {
        match &self.features {
            Some(f) => f.clone(),
            None => (0..N_FEATURES).collect(),
        }
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParameter("min_leaf must be >= 1".into()));
        }
        let allowed = self.allowed_features();
        if allowed.is_empty() || allowed.iter().any(|&f| f >= N_FEATURES) {
            return Err(ClassifierError::InvalidParameter(format!(
                "bad feature set {allowed:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` descends left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Distribution,
        samples: usize,
    },
}

/// A binary classification tree stored as a flat node array, root first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<Node>,
}

impl ClassificationTree {
    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.split_count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Leaf reached by `x` and the number of comparisons on the way.
    pub fn descend(&self, x: &FeatureVector) -> (&Node, usize) {
        let mut i = 0;
        let mut comparisons = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    comparisons += 1;
                    i = if x.0[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return (leaf, comparisons),
            }
        }
    }

    pub fn features_used(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

impl Classifier for ClassificationTree {
    fn distribution(&self, fv: &FeatureVector) -> Distribution {
        match self.descend(fv).0 {
            Node::Leaf { distribution, .. } => *distribution,
            Node::Split { .. } => unreachable!("descend stops at leaves"),
        }
    }

    fn operations(&self, fv: &FeatureVector) -> usize {
        self.descend(fv).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Candidate {
    node: usize,
    order: usize,
    depth: usize,
    rows: Vec<usize>,
    split: Split,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap on gain; among equal gains the earlier-created node wins.
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .gain
            .total_cmp(&other.split.gain)
            .then_with(|| other.order.cmp(&self.order))
    }
}

fn class_counts(data: &Dataset, rows: &[usize]) -> [usize; Technology::COUNT] {
    let mut c = [0; Technology::COUNT];
    for &r in rows {
        c[data.rows[r].label.index()] += 1;
    }
    c
}

fn sum_sq_over_n(counts: &[usize; Technology::COUNT], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64
}

fn leaf(counts: &[usize; Technology::COUNT], n: usize) -> Node {
    let mut distribution = [0.0; Technology::COUNT];
    for (d, &c) in distribution.iter_mut().zip(counts) {
        *d = c as f64 / n as f64;
    }
    Node::Leaf {
        distribution,
        samples: n,
    }
}

/// Gini-optimal threshold over `features`. Gain is the drop in
/// sample-weighted impurity; ties go to the lower feature index, then the
/// lower threshold.
fn best_split(data: &Dataset, rows: &[usize], features: &[usize], min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total = class_counts(data, rows);
    if total.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let parent = sum_sq_over_n(&total, n);
    let mut sorted = rows.to_vec();
    let mut best: Option<Split> = None;
    let mut ordered_features = features.to_vec();
    ordered_features.sort_unstable();
    for &f in &ordered_features {
        let value = |r: usize| data.rows[r].features.0[f];
        sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let mut left = [0usize; Technology::COUNT];
        for i in 0..n - 1 {
            left[data.rows[sorted[i]].label.index()] += 1;
            let nl = i + 1;
            let (a, b) = (value(sorted[i]), value(sorted[i + 1]));
            if a == b || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let mut right = total;
            for (r, l) in right.iter_mut().zip(&left) {
                *r -= l;
            }
            let gain = sum_sq_over_n(&left, nl) + sum_sq_over_n(&right, n - nl) - parent;
            if best.is_none_or(|s| gain > s.gain) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|s| s.gain > MIN_GAIN)
}

/// Shared best-first grower. With `rng` set, each node considers a fresh
/// random subset of `per_split` features.
pub(crate) fn grow(
    data: &Dataset,
    rows: Vec<usize>,
    params: &TreeParams,
    mut subsample: Option<(&mut ChaCha8Rng, usize)>,
) -> Result<ClassificationTree, ClassifierError> {
    params.validate()?;
    if rows.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let allowed = params.allowed_features();
    let candidate_features = |sub: &mut Option<(&mut ChaCha8Rng, usize)>| -> Vec<usize> {
        match sub {
            Some((rng, k)) if *k < allowed.len() => sample(&mut **rng, allowed.len(), *k)
                .into_iter()
                .map(|i| allowed[i])
                .collect(),
            _ => allowed.clone(),
        }
    };

    let mut nodes = vec![leaf(&class_counts(data, &rows), rows.len())];
    let mut heap = BinaryHeap::new();
    let mut order = 0;
    let mut consider = |heap: &mut BinaryHeap<Candidate>,
                        sub: &mut Option<(&mut ChaCha8Rng, usize)>,
                        node: usize,
                        depth: usize,
                        rows: Vec<usize>| {
        if params.max_depth.is_some_and(|d| depth >= d) {
            return;
        }
        let features = candidate_features(sub);
        if let Some(split) = best_split(data, &rows, &features, params.min_leaf) {
            heap.push(Candidate {
                node,
                order,
                depth,
                rows,
                split,
            });
        }
        order += 1;
    };
    consider(&mut heap, &mut subsample, 0, 0, rows);

    let mut splits = 0;
    while splits < params.max_splits {
        let Some(c) = heap.pop() else { break };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = c
            .rows
            .iter()
            .partition(|&&r| data.rows[r].features.0[c.split.feature] <= c.split.threshold);
        let left = nodes.len();
        nodes.push(leaf(&class_counts(data, &l_rows), l_rows.len()));
        nodes.push(leaf(&class_counts(data, &r_rows), r_rows.len()));
        nodes[c.node] = Node::Split {
            feature: c.split.feature,
            threshold: c.split.threshold,
            left,
            right: left + 1,
        };
        splits += 1;
        consider(&mut heap, &mut subsample, left, c.depth + 1, l_rows);
        consider(&mut heap, &mut subsample, left + 1, c.depth + 1, r_rows);
    }
    Ok(ClassificationTree { nodes })
}

/// Deterministic best-first Gini CART with at most `params.max_splits`
/// internal nodes.
pub fn train_tree(data: &Dataset, params: &TreeParams) -> Result<ClassificationTree, ClassifierError> {
    data.validate()?;
    grow(data, (0..data.len()).collect(), params, None)
}
