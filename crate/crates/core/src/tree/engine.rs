//! Exact greedy tree growth over pre-coded columns.
//!
//! Every column is coded once into the ranks of its sorted distinct values.
//! A node's candidate thresholds are the midpoints between consecutive
//! distinct values present in the node, which is the same set an exact
//! sort-based CART scan produces; the code only changes how that sequence is
//! enumerated (a histogram over ranks for large nodes, a sort for small ones).

use rand::seq::index::sample;

use crate::matrix::DesignMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

use super::{Tree, TreeNode};

/// Rank-coded copy of a matrix, column-major.
#[derive(Debug, Clone)]
pub struct BinnedColumns<T> {
    n_rows: usize,
    /// Sorted distinct values per column.
    values: Vec<Vec<T>>,
    /// `codes[j][i]` is the rank of `x[i][j]` within `values[j]`.
    codes: Vec<Vec<u32>>,
}

impl<T: Scalar> BinnedColumns<T> {
    pub fn new(x: &DesignMatrix<T>) -> Self {
        let n = x.n_rows();
        let mut values = Vec::with_capacity(x.n_cols());
        let mut codes = Vec::with_capacity(x.n_cols());
        let mut order: Vec<u32> = Vec::with_capacity(n);
        for j in 0..x.n_cols() {
            order.clear();
            order.extend(0..n as u32);
            order.sort_by(|&a, &b| x.get(a as usize, j).partial_cmp(&x.get(b as usize, j)).expect("finite feature values"));
            let mut distinct: Vec<T> = Vec::new();
            let mut col = vec![0u32; n];
            for &r in &order {
                let v = x.get(r as usize, j);
                if distinct.last() != Some(&v) {
                    distinct.push(v);
                }
                col[r as usize] = (distinct.len() - 1) as u32;
            }
            values.push(distinct);
            codes.push(col);
        }
        BinnedColumns {
            n_rows: n,
            values,
            codes,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.values.len()
    }

    pub fn n_bins(&self, j: usize) -> usize {
        self.values[j].len()
    }

    #[inline]
    pub fn code(&self, row: u32, j: usize) -> u32 {
        self.codes[j][row as usize]
    }

    /// Threshold separating rank `lo` from the next present rank `hi`.
    pub fn threshold(&self, j: usize, lo: u32, hi: u32) -> T {
        midpoint(self.values[j][lo as usize], self.values[j][hi as usize])
    }
}

/// `(a + b) / 2`, pulled back to `a` if rounding lands on `b`, so that
/// `a <= t < b` always holds.
#[inline]
pub fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let mid = a + (b - a) * T::half();
    if mid >= b || mid < a {
        a
    } else {
        mid
    }
}

/// Split criterion: how per-row statistics aggregate and how a partition is
/// scored.
pub trait Criterion<T: Scalar> {
    type Stats: Copy + Default;
    type Leaf;

    fn row_stats(&self, row: u32) -> Self::Stats;
    fn add(acc: &mut Self::Stats, s: &Self::Stats);
    fn sub(total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn rows(s: &Self::Stats) -> usize;
    /// Gain of the partition, or `None` when it violates a child constraint.
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> Option<T>;
    /// True when no split can improve the node.
    fn is_terminal(&self, s: &Self::Stats) -> bool;
    fn leaf(&self, s: &Self::Stats) -> Self::Leaf;
    /// Minimum gain for a split to count as positive.
    fn min_gain(&self) -> T {
        T::epsilon() * T::from_f64_lossy(16.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoundSplit<T> {
    pub feature: usize,
    pub code: u32,
    pub threshold: T,
    pub gain: T,
}

/// Growth limits shared by classification and regression trees.
#[derive(Debug, Clone, Copy)]
pub struct GrowLimits {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per node, sampled from `features`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

struct Scratch<S> {
    hist: Vec<S>,
    seen: Vec<bool>,
    pairs: Vec<(u32, u32)>,
}

/// Best split of `rows` over `features` (ascending). Ties resolve to the
/// earlier feature, then the lower threshold.
fn best_split<T: Scalar, C: Criterion<T>>(
    crit: &C,
    cols: &BinnedColumns<T>,
    rows: &[u32],
    parent: &C::Stats,
    features: &[usize],
    scratch: &mut Scratch<C::Stats>,
) -> Option<FoundSplit<T>> {
    let min_gain = crit.min_gain();
    let mut best: Option<FoundSplit<T>> = None;
    let m = rows.len();
    for &j in features {
        let n_bins = cols.n_bins(j);
        if n_bins < 2 {
            continue;
        }
        let consider = |left: &C::Stats, lo: u32, hi: u32, best: &mut Option<FoundSplit<T>>| {
            let right = C::sub(parent, left);
            if let Some(gain) = crit.gain(parent, left, &right) {
                if gain > min_gain && best.is_none_or(|b| gain > b.gain) {
                    *best = Some(FoundSplit {
                        feature: j,
                        code: lo,
                        threshold: cols.threshold(j, lo, hi),
                        gain,
                    });
                }
            }
        };
        if n_bins <= 2 * m {
            let hist = &mut scratch.hist;
            let seen = &mut scratch.seen;
            hist.clear();
            hist.resize(n_bins, C::Stats::default());
            seen.clear();
            seen.resize(n_bins, false);
            for &r in rows {
                let c = cols.code(r, j) as usize;
                C::add(&mut hist[c], &crit.row_stats(r));
                seen[c] = true;
            }
            let mut left = C::Stats::default();
            let mut prev: Option<u32> = None;
            for c in 0..n_bins {
                if !seen[c] {
                    continue;
                }
                if let Some(p) = prev {
                    consider(&left, p, c as u32, &mut best);
                }
                C::add(&mut left, &hist[c]);
                prev = Some(c as u32);
            }
        } else {
            let pairs = &mut scratch.pairs;
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (cols.code(r, j), r)));
            pairs.sort_unstable();
            let mut left = C::Stats::default();
            let mut i = 0;
            while i < pairs.len() {
                let c = pairs[i].0;
                if i > 0 {
                    consider(&left, pairs[i - 1].0, c, &mut best);
                }
                while i < pairs.len() && pairs[i].0 == c {
                    C::add(&mut left, &crit.row_stats(pairs[i].1));
                    i += 1;
                }
            }
        }
    }
    best
}

pub(crate) struct GrowOutput<T, L> {
    pub tree: Tree<T, L>,
    /// Sum over accepted splits of `rows_at_node * gain`, per feature.
    pub importance: Vec<T>,
}

struct Task {
    rows: Vec<u32>,
    depth: usize,
    parent: Option<(usize, bool)>,
}

/// Grows a tree depth-first; nodes are stored in preorder. `features` is the
/// pool candidate features are drawn from (all columns for plain CART).
pub(crate) fn grow_tree<T: Scalar, C: Criterion<T>>(
    crit: &C,
    cols: &BinnedColumns<T>,
    rows: Vec<u32>,
    features: &[usize],
    limits: &GrowLimits,
) -> GrowOutput<T, C::Leaf> {
    let mut nodes: Vec<TreeNode<T, C::Leaf>> = Vec::new();
    let mut importance = vec![T::zero(); cols.n_cols()];
    let mut scratch = Scratch {
        hist: Vec::new(),
        seen: Vec::new(),
        pairs: Vec::new(),
    };
    let mut candidates: Vec<usize> = Vec::with_capacity(features.len());
    let mut stack = vec![Task {
        rows,
        depth: 0,
        parent: None,
    }];

    while let Some(task) = stack.pop() {
        let id = nodes.len();
        if let Some((parent, is_right)) = task.parent {
            if let TreeNode::Internal { left, right, .. } = &mut nodes[parent] {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let mut stats = C::Stats::default();
        for &r in &task.rows {
            C::add(&mut stats, &crit.row_stats(r));
        }
        let can_split = limits.max_depth.is_none_or(|d| task.depth < d)
            && task.rows.len() >= limits.min_samples_split
            && task.rows.len() >= 2
            && !crit.is_terminal(&stats);

        let split = if can_split {
            candidates.clear();
            match limits.mtry {
                Some(k) if k < features.len() => {
                    let mut rng = stream_rng(limits.seed, id as u64);
                    candidates.extend(sample(&mut rng, features.len(), k).into_iter().map(|i| features[i]));
                    candidates.sort_unstable();
                }
                _ => candidates.extend_from_slice(features),
            }
            best_split(crit, cols, &task.rows, &stats, &candidates, &mut scratch)
        } else {
            None
        };

        match split {
            None => nodes.push(TreeNode::Leaf(crit.leaf(&stats))),
            Some(s) => {
                importance[s.feature] += s.gain * T::from_usize_lossy(C::rows(&stats));
                let (left, right): (Vec<u32>, Vec<u32>) =
                    task.rows.iter().partition(|&&r| cols.code(r, s.feature) <= s.code);
                nodes.push(TreeNode::Internal {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push(Task {
                    rows: right,
                    depth: task.depth + 1,
                    parent: Some((id, true)),
                });
                stack.push(Task {
                    rows: left,
                    depth: task.depth + 1,
                    parent: Some((id, false)),
                });
            }
        }
    }

    GrowOutput {
        tree: Tree {
            dim: cols.n_cols(),
            nodes,
        },
        importance,
    }
}
