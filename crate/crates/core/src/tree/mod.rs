//! CART classification trees with Gini impurity.

pub(crate) mod engine;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linear::{argmax, ClassScores};
use crate::matrix::DesignMatrix;
use crate::scalar::Scalar;

pub use engine::{midpoint, BinnedColumns};
use engine::{grow_tree, Criterion, GrowLimits};

const K: usize = NUM_CLASSES;

pub type ClassCounts = [u32; NUM_CLASSES];

/// Tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<T, L> {
    Internal {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T, L> {
    pub dim: usize,
    pub nodes: Vec<TreeNode<T, L>>,
}

impl<T: Scalar, L> Tree<T, L> {
    pub fn leaf_for(&self, x: &[T]) -> &L {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf(leaf) => return leaf,
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                TreeNode::Leaf(_) => best = best.max(d),
            }
        }
        best
    }

    pub fn leaves(&self) -> impl Iterator<Item = &L> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf(l) => Some(l),
            TreeNode::Internal { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Checks child links and feature indices.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Internal {
                feature, left, right, ..
            } = node
            {
                if *feature >= self.dim || *left <= id || *right <= id || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(Error::Format(format!("tree node {id} has invalid links")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLeaf<T> {
    pub counts: ClassCounts,
    pub probabilities: ClassScores<T>,
}

impl<T: Scalar> ClassLeaf<T> {
    pub fn from_counts(counts: ClassCounts) -> Self {
        let total = T::from_usize_lossy(counts.iter().map(|&c| c as usize).sum());
        let mut probabilities = [T::zero(); K];
        for (p, &c) in probabilities.iter_mut().zip(&counts) {
            *p = T::from_usize_lossy(c as usize) / total;
        }
        ClassLeaf {
            counts,
            probabilities,
        }
    }
}

pub type ClassificationTree<T> = Tree<T, ClassLeaf<T>>;

/// `1 - sum(p_k^2)`.
pub fn gini<T: Scalar>(counts: &ClassCounts) -> Result<T> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(Error::InconsistentCounts("gini of an empty node".into()));
    }
    Ok(gini_unchecked(counts, total))
}

#[inline]
fn gini_unchecked<T: Scalar>(counts: &ClassCounts, total: u64) -> T {
    let n = T::from_f64_lossy(total as f64);
    let sum_sq: T = counts
        .iter()
        .map(|&c| {
            let p = T::from_f64_lossy(c as f64) / n;
            p * p
        })
        .sum();
    T::one() - sum_sq
}

#[inline]
fn gain_unchecked<T: Scalar>(parent: &ClassCounts, left: &ClassCounts, right: &ClassCounts) -> T {
    let n: u64 = parent.iter().map(|&c| c as u64).sum();
    let nl: u64 = left.iter().map(|&c| c as u64).sum();
    let nr = n - nl;
    let nt = T::from_f64_lossy(n as f64);
    gini_unchecked::<T>(parent, n)
        - T::from_f64_lossy(nl as f64) / nt * gini_unchecked::<T>(left, nl)
        - T::from_f64_lossy(nr as f64) / nt * gini_unchecked::<T>(right, nr)
}

/// Impurity decrease of a binary partition.
pub fn split_gain<T: Scalar>(parent: &ClassCounts, left: &ClassCounts, right: &ClassCounts) -> Result<T> {
    for k in 0..K {
        if left[k] as u64 + right[k] as u64 != parent[k] as u64 {
            return Err(Error::InconsistentCounts(format!(
                "class {k}: {} + {} != {}",
                left[k], right[k], parent[k]
            )));
        }
    }
    if left.iter().all(|&c| c == 0) || right.iter().all(|&c| c == 0) {
        return Err(Error::InconsistentCounts("split has an empty child".into()));
    }
    Ok(gain_unchecked(parent, left, right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until another stopping rule fires.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Candidate features per node; `None` uses all features.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl TreeParams {
    /// Depth 20, at least 5 rows per leaf, split bound `2 * min_samples_leaf`.
    pub fn cart_default() -> TreeParams {
        TreeParams {
            max_depth: Some(20),
            min_samples_leaf: 5,
            min_samples_split: 10,
            mtry: None,
            seed: 0,
        }
    }

    /// No depth limit, one row per leaf.
    pub fn unconstrained() -> TreeParams {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            mtry: None,
            seed: 0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParam("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParam("min_samples_leaf must be >= 1".into()));
        }
        if let Some(m) = self.mtry {
            if m < 1 || m > dim {
                return Err(Error::InvalidParam(format!("mtry must lie in [1, {dim}], got {m}")));
            }
        }
        Ok(())
    }

    pub(crate) fn limits(&self) -> GrowLimits {
        GrowLimits {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            mtry: self.mtry,
            seed: self.seed,
        }
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        Self::cart_default()
    }
}

pub(crate) struct GiniCriterion<'a> {
    pub labels: &'a [ClassLabel],
    pub min_samples_leaf: usize,
}

impl<T: Scalar> Criterion<T> for GiniCriterion<'_> {
    type Stats = ClassCounts;
    type Leaf = ClassLeaf<T>;

    #[inline]
    fn row_stats(&self, row: u32) -> ClassCounts {
        let mut c = [0; K];
        c[self.labels[row as usize].index()] = 1;
        c
    }

    #[inline]
    fn add(acc: &mut ClassCounts, s: &ClassCounts) {
        for (a, b) in acc.iter_mut().zip(s) {
            *a += b;
        }
    }

    #[inline]
    fn sub(total: &ClassCounts, part: &ClassCounts) -> ClassCounts {
        let mut out = *total;
        for (o, p) in out.iter_mut().zip(part) {
            *o -= p;
        }
        out
    }

    fn rows(s: &ClassCounts) -> usize {
        s.iter().map(|&c| c as usize).sum()
    }

    #[inline]
    fn gain(&self, parent: &ClassCounts, left: &ClassCounts, right: &ClassCounts) -> Option<T> {
        let nl = <Self as Criterion<T>>::rows(left);
        let nr = <Self as Criterion<T>>::rows(right);
        if nl < self.min_samples_leaf || nr < self.min_samples_leaf {
            return None;
        }
        Some(gain_unchecked(parent, left, right))
    }

    fn is_terminal(&self, s: &ClassCounts) -> bool {
        s.iter().filter(|&&c| c > 0).count() <= 1
    }

    fn leaf(&self, s: &ClassCounts) -> ClassLeaf<T> {
        ClassLeaf::from_counts(*s)
    }
}

/// A chosen split: `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

/// Straightforward exact search over the given rows: sorts each candidate
/// feature's values, tries every midpoint between consecutive distinct
/// values and keeps the best legal positive-gain split (ties: lower feature,
/// then lower threshold).
pub fn find_best_split<T: Scalar>(
    x: &DesignMatrix<T>,
    rows: &[usize],
    features: &[usize],
    params: &TreeParams,
) -> Option<SplitCandidate<T>> {
    let crit = GiniCriterion {
        labels: x.labels(),
        min_samples_leaf: params.min_samples_leaf,
    };
    if rows.len() < params.min_samples_split.max(2) {
        return None;
    }
    let mut parent = [0u32; K];
    for &r in rows {
        parent[x.labels()[r].index()] += 1;
    }
    let min_gain = <GiniCriterion as Criterion<T>>::min_gain(&crit);
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    let mut best: Option<SplitCandidate<T>> = None;
    for &j in &sorted_features {
        let mut pairs: Vec<(T, ClassLabel)> = rows.iter().map(|&r| (x.get(r, j), x.labels()[r])).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        let mut left = [0u32; K];
        for i in 0..pairs.len() - 1 {
            left[pairs[i].1.index()] += 1;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let right = <GiniCriterion as Criterion<T>>::sub(&parent, &left);
            if let Some(gain) = Criterion::<T>::gain(&crit, &parent, &left, &right) {
                if gain > min_gain && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: j,
                        threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                        gain,
                    });
                }
            }
        }
    }
    best
}

pub(crate) fn grow_on<T: Scalar>(
    cols: &BinnedColumns<T>,
    labels: &[ClassLabel],
    rows: Vec<u32>,
    params: &TreeParams,
) -> (ClassificationTree<T>, Vec<T>) {
    let crit = GiniCriterion {
        labels,
        min_samples_leaf: params.min_samples_leaf,
    };
    let features: Vec<usize> = (0..cols.n_cols()).collect();
    let out = grow_tree(&crit, cols, rows, &features, &params.limits());
    (out.tree, out.importance)
}

/// Grows a CART tree on every row of `x`.
pub fn grow<T: Scalar>(x: &DesignMatrix<T>, params: &TreeParams) -> Result<ClassificationTree<T>> {
    if x.n_rows() == 0 {
        return Err(Error::Empty);
    }
    params.validate(x.n_cols())?;
    let cols = BinnedColumns::new(x);
    let rows = (0..x.n_rows() as u32).collect();
    Ok(grow_on(&cols, x.labels(), rows, params).0)
}

pub fn predict_proba<T: Scalar>(tree: &ClassificationTree<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassScores<T>>> {
    x.ensure_cols(tree.dim)?;
    Ok(x.rows().map(|row| tree.leaf_for(row).probabilities).collect())
}

pub fn predict<T: Scalar>(tree: &ClassificationTree<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassLabel>> {
    Ok(predict_proba(tree, x)?.iter().map(|p| argmax(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn labels(idx: &[usize]) -> Vec<ClassLabel> {
        idx.iter().map(|&i| ClassLabel::from_index(i).unwrap()).collect()
    }

    fn accuracy(tree: &ClassificationTree<f64>, x: &DesignMatrix<f64>) -> f64 {
        let p = predict(tree, x).unwrap();
        p.iter().zip(x.labels()).filter(|(a, b)| a == b).count() as f64 / x.n_rows() as f64
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini::<f64>(&[10, 0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(gini::<f64>(&[1, 1, 0, 0, 0]).unwrap(), 0.5);
        assert!((gini::<f64>(&[2, 1, 1, 0, 0]).unwrap() - 0.625).abs() < 1e-15);
        assert!(gini::<f64>(&[0; 5]).is_err());
        let max = gini::<f64>(&[3, 3, 3, 3, 3]).unwrap();
        assert!((max - 0.8).abs() < 1e-15);
    }

    #[test]
    fn split_gain_examples() {
        let g: f64 = split_gain(&[1, 1, 0, 0, 0], &[1, 0, 0, 0, 0], &[0, 1, 0, 0, 0]).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        let g: f64 = split_gain(&[2, 2, 0, 0, 0], &[1, 1, 0, 0, 0], &[1, 1, 0, 0, 0]).unwrap();
        assert!(g.abs() < 1e-15);
        assert!(split_gain::<f64>(&[2, 0, 0, 0, 0], &[1, 0, 0, 0, 0], &[0, 1, 0, 0, 0]).is_err());
        assert!(split_gain::<f64>(&[2, 0, 0, 0, 0], &[2, 0, 0, 0, 0], &[0; 5]).is_err());
    }

    #[test]
    fn best_split_single_midpoint() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0]], labels(&[0, 1])).unwrap();
        let s = find_best_split(&x, &[0, 1], &[0], &TreeParams::unconstrained()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 0.5);
        assert!((s.gain - 0.5f64).abs() < 1e-15);
    }

    #[test]
    fn best_split_constant_feature_is_none() {
        let x = DesignMatrix::from_rows(&[vec![3.0], vec![3.0]], labels(&[0, 1])).unwrap();
        assert!(find_best_split(&x, &[0, 1], &[0], &TreeParams::unconstrained()).is_none());
    }

    #[test]
    fn best_split_tie_goes_to_lower_feature() {
        let x = DesignMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]], labels(&[0, 1])).unwrap();
        let s = find_best_split(&x, &[0, 1], &[1, 0], &TreeParams::unconstrained()).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn best_split_respects_min_leaf() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], labels(&[0, 1, 1])).unwrap();
        let params = TreeParams {
            min_samples_leaf: 2,
            ..TreeParams::unconstrained()
        };
        // only legal partitions leave a single row on one side
        assert!(find_best_split(&x, &[0, 1, 2], &[0], &params).is_none());
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], labels(&[2, 2, 2])).unwrap();
        let t = grow(&x, &TreeParams::unconstrained()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.depth(), 0);
    }

    fn xor() -> DesignMatrix<f64> {
        DesignMatrix::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            labels(&[0, 1, 1, 0]),
        )
        .unwrap()
    }

    #[test]
    fn xor_depth_two_vs_one() {
        // Gini gain of the first XOR split is zero, so seed it with a
        // slightly unbalanced copy that makes the first split positive.
        let x = DesignMatrix::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            labels(&[0, 0, 1, 1, 0]),
        )
        .unwrap();
        let deep = grow(
            &x,
            &TreeParams {
                max_depth: Some(2),
                ..TreeParams::unconstrained()
            },
        )
        .unwrap();
        assert_eq!(accuracy(&deep, &x), 1.0);
        assert_eq!(accuracy(&deep, &xor()), 1.0);
        let shallow = grow(
            &xor(),
            &TreeParams {
                max_depth: Some(1),
                ..TreeParams::unconstrained()
            },
        )
        .unwrap();
        assert!(accuracy(&shallow, &xor()) <= 0.75);
    }

    #[test]
    fn boundary_value_routes_left() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0]], labels(&[0, 1])).unwrap();
        let t = grow(&x, &TreeParams::unconstrained()).unwrap();
        let probe = DesignMatrix::from_rows(&[vec![0.5]], labels(&[0])).unwrap();
        assert_eq!(predict(&t, &probe).unwrap(), labels(&[0]));
    }

    #[test]
    fn single_leaf_returns_training_distribution() {
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]], labels(&[0, 1, 1, 3])).unwrap();
        let t = grow(&x, &TreeParams::unconstrained()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        let p = predict_proba(&t, &x).unwrap();
        assert_eq!(p[0], [0.25, 0.5, 0.0, 0.25, 0.0]);
    }

    #[test]
    fn predict_dimension_mismatch() {
        let t = grow(&xor(), &TreeParams::unconstrained()).unwrap();
        let bad = DesignMatrix::from_rows(&[vec![0.0]], labels(&[0])).unwrap();
        assert!(matches!(predict(&t, &bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(TreeParams { max_depth: Some(0), ..TreeParams::unconstrained() }.validate(3).is_err());
        assert!(TreeParams { min_samples_leaf: 0, ..TreeParams::unconstrained() }.validate(3).is_err());
        assert!(TreeParams { mtry: Some(4), ..TreeParams::unconstrained() }.validate(3).is_err());
    }

    #[test]
    fn unconstrained_tree_memorizes_random_data() {
        let mut rng = stream_rng(5, 0);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..200).map(|_| rng.gen_range(0..K)).collect();
        let x = DesignMatrix::from_rows(&rows, labels(&y)).unwrap();
        let t = grow(&x, &TreeParams::unconstrained()).unwrap();
        t.validate().unwrap();
        assert_eq!(accuracy(&t, &x), 1.0);
        for p in predict_proba(&t, &x).unwrap() {
            assert!(p.contains(&1.0));
        }
    }
}
