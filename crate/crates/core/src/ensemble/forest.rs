use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linear::{argmax, ClassScores};
use crate::matrix::DesignMatrix;
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::Scalar;
use crate::tree::{grow_on, BinnedColumns, ClassificationTree, TreeParams};

/// Row sampling applied before growing each tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSampling {
    Bootstrap,
    /// Every tree sees every row once; used to compare against plain CART.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Defaults to `floor(sqrt(d))` when absent.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub sampling: RowSampling,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            max_depth: None,
            min_samples_leaf: 2,
            min_samples_split: 4,
            sampling: RowSampling::Bootstrap,
            seed: 0,
        }
    }
}

/// `floor(sqrt(d))`, at least 1.
pub fn default_mtry(d: usize) -> usize {
    let mut m = (d as f64).sqrt().floor() as usize;
    while (m + 1) * (m + 1) <= d {
        m += 1;
    }
    while m * m > d {
        m -= 1;
    }
    m.max(1)
}

impl ForestParams {
    pub fn resolved_mtry(&self, d: usize) -> usize {
        self.mtry.unwrap_or_else(|| default_mtry(d))
    }

    pub fn tree_params(&self, d: usize, tree_index: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            mtry: Some(self.resolved_mtry(d)),
            seed: derive_seed(self.seed, tree_index as u64),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidParam("n_trees must be >= 1".into()));
        }
        let m = self.resolved_mtry(d);
        if m < 1 || m > d {
            return Err(Error::InvalidParam(format!("mtry must lie in [1, {d}], got {m}")));
        }
        self.tree_params(d, 0).validate(d)
    }
}

/// `n` indices drawn uniformly with replacement from the stream
/// `(master_seed, tree_index)`.
pub fn bootstrap_indices(n: usize, master_seed: u64, tree_index: usize) -> Vec<usize> {
    let mut rng = stream_rng(derive_seed(master_seed, 0xB007), tree_index as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub dim: usize,
    pub params: ForestParams,
    pub trees: Vec<ClassificationTree<T>>,
    /// Impurity decrease per feature, normalized to sum to 1.
    pub importance: Vec<T>,
}

pub fn train_forest<T: Scalar>(x: &DesignMatrix<T>, params: &ForestParams) -> Result<ForestModel<T>> {
    if x.n_rows() == 0 {
        return Err(Error::Empty);
    }
    params.validate(x.n_cols())?;
    let cols = BinnedColumns::new(x);
    train_forest_on(&cols, x.labels(), params)
}

pub(crate) fn train_forest_on<T: Scalar>(
    cols: &BinnedColumns<T>,
    labels: &[ClassLabel],
    params: &ForestParams,
) -> Result<ForestModel<T>> {
    let n = cols.n_rows();
    let d = cols.n_cols();
    let grown: Vec<(ClassificationTree<T>, Vec<T>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<u32> = match params.sampling {
                RowSampling::Bootstrap => bootstrap_indices(n, params.seed, i).into_iter().map(|r| r as u32).collect(),
                RowSampling::Identity => (0..n as u32).collect(),
            };
            grow_on(cols, labels, rows, &params.tree_params(d, i))
        })
        .collect();

    let mut importance = vec![T::zero(); d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (a, b) in importance.iter_mut().zip(imp) {
            *a += b;
        }
        trees.push(tree);
    }
    let total: T = importance.iter().copied().sum();
    if total > T::zero() {
        for v in importance.iter_mut() {
            *v /= total;
        }
    }
    Ok(ForestModel {
        dim: d,
        params: params.clone(),
        trees,
        importance,
    })
}

/// Mean of the member trees' leaf distributions.
pub fn forest_predict_proba<T: Scalar>(f: &ForestModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassScores<T>>> {
    x.ensure_cols(f.dim)?;
    let n_trees = T::from_usize_lossy(f.trees.len());
    Ok(x.rows()
        .map(|row| {
            let mut acc = [T::zero(); NUM_CLASSES];
            for tree in &f.trees {
                for (a, &p) in acc.iter_mut().zip(&tree.leaf_for(row).probabilities) {
                    *a += p;
                }
            }
            for a in acc.iter_mut() {
                *a /= n_trees;
            }
            acc
        })
        .collect())
}

pub fn forest_predict<T: Scalar>(f: &ForestModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassLabel>> {
    Ok(forest_predict_proba(f, x)?.iter().map(|p| argmax(p)).collect())
}
