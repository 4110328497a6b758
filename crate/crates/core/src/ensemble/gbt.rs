//! Newton-boosted regression trees for softmax cross-entropy.
//!
//! Each round computes the per-class gradient `p - y` and hessian `p (1 - p)`
//! of the current scores, fits one regression tree per class on them with
//! the second-order gain and leaf weight `-G / (H + lambda)`, and adds the
//! learning-rate-scaled tree outputs to the scores.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linear::{argmax, log_sum_exp, softmax_in_place, ClassScores};
use crate::matrix::DesignMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tree::engine::{grow_tree, Criterion, GrowLimits};
use crate::tree::{BinnedColumns, Tree};

const K: usize = NUM_CLASSES;

/// Smallest prior used for the base score of a class absent from training.
const MIN_PRIOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn (without replacement) per tree.
    pub subsample: f64,
    /// Fraction of columns drawn per tree.
    pub colsample_bytree: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.1,
            subsample: 0.8,
            colsample_bytree: 0.8,
            lambda: 1.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn without_subsampling(mut self) -> Self {
        self.subsample = 1.0;
        self.colsample_bytree = 1.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.learning_rate) {
            return Err(Error::InvalidParam("learning_rate must lie in (0,1]".into()));
        }
        if !in_unit(self.subsample) || !in_unit(self.colsample_bytree) {
            return Err(Error::InvalidParam("subsample fractions must lie in (0,1]".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParam("lambda must be >= 0".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidParam("max_depth must be >= 1".into()));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::InvalidParam("min_child_weight must be >= 0".into()));
        }
        Ok(())
    }
}

pub type RegressionTree<T> = Tree<T, T>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel<T> {
    pub dim: usize,
    pub params: GbtParams,
    pub base_score: ClassScores<T>,
    pub learning_rate: T,
    /// `rounds[r][k]` is round `r`'s tree for class `k`.
    pub rounds: Vec<Vec<RegressionTree<T>>>,
}

impl<T: Scalar> GbtModel<T> {
    pub fn raw_scores(&self, x: &[T]) -> ClassScores<T> {
        let mut s = self.base_score;
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                s[k] += self.learning_rate * *tree.leaf_for(x);
            }
        }
        s
    }
}

/// Per-row gradients and hessians, one row per sample.
pub type GradHess<T> = (Vec<ClassScores<T>>, Vec<ClassScores<T>>);

/// Per-row softmax gradient and hessian of the cross-entropy.
pub fn softmax_grad_hess<T: Scalar>(scores: &[ClassScores<T>], labels: &[ClassLabel]) -> Result<GradHess<T>> {
    if scores.len() != labels.len() {
        return Err(Error::Length {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let mut g = Vec::with_capacity(scores.len());
    let mut h = Vec::with_capacity(scores.len());
    for (s, y) in scores.iter().zip(labels) {
        let mut p = *s;
        softmax_in_place(&mut p);
        let mut gi = p;
        gi[y.index()] -= T::one();
        let mut hi = [T::zero(); K];
        for (hk, &pk) in hi.iter_mut().zip(&p) {
            *hk = pk * (T::one() - pk);
        }
        g.push(gi);
        h.push(hi);
    }
    Ok((g, h))
}

/// Mean softmax cross-entropy of raw scores.
pub fn cross_entropy<T: Scalar>(scores: &[ClassScores<T>], labels: &[ClassLabel]) -> T {
    let total: T = scores
        .iter()
        .zip(labels)
        .map(|(s, y)| log_sum_exp(s) - s[y.index()])
        .sum();
    total / T::from_usize_lossy(scores.len().max(1))
}

/// Second-order gain and leaf weight.
pub(crate) struct NewtonCriterion<'a, T> {
    pub grad: &'a [T],
    pub hess: &'a [T],
    pub lambda: T,
    pub min_child_weight: T,
}

/// Sums of gradient and hessian plus the row count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradStats<T> {
    pub g: T,
    pub h: T,
    pub n: u32,
}

impl<T: Scalar> NewtonCriterion<'_, T> {
    #[inline]
    fn score(&self, s: &GradStats<T>) -> T {
        s.g * s.g / (s.h + self.lambda)
    }
}

impl<T: Scalar> Criterion<T> for NewtonCriterion<'_, T> {
    type Stats = GradStats<T>;
    type Leaf = T;

    #[inline]
    fn row_stats(&self, row: u32) -> GradStats<T> {
        GradStats {
            g: self.grad[row as usize],
            h: self.hess[row as usize],
            n: 1,
        }
    }

    #[inline]
    fn add(acc: &mut GradStats<T>, s: &GradStats<T>) {
        acc.g += s.g;
        acc.h += s.h;
        acc.n += s.n;
    }

    #[inline]
    fn sub(total: &GradStats<T>, part: &GradStats<T>) -> GradStats<T> {
        GradStats {
            g: total.g - part.g,
            h: total.h - part.h,
            n: total.n - part.n,
        }
    }

    fn rows(s: &GradStats<T>) -> usize {
        s.n as usize
    }

    #[inline]
    fn gain(&self, parent: &GradStats<T>, left: &GradStats<T>, right: &GradStats<T>) -> Option<T> {
        if left.n == 0 || right.n == 0 || left.h < self.min_child_weight || right.h < self.min_child_weight {
            return None;
        }
        Some(T::half() * (self.score(left) + self.score(right) - self.score(parent)))
    }

    fn is_terminal(&self, s: &GradStats<T>) -> bool {
        s.n < 2
    }

    fn leaf(&self, s: &GradStats<T>) -> T {
        leaf_weight(s.g, s.h, self.lambda)
    }
}

/// `-G / (H + lambda)`.
pub fn leaf_weight<T: Scalar>(g: T, h: T, lambda: T) -> T {
    let denom = h + lambda;
    if denom > T::zero() {
        -g / denom
    } else {
        T::zero()
    }
}

/// Fits one regression tree on `rows` using only `features`.
pub fn fit_gradient_tree<T: Scalar>(
    cols: &BinnedColumns<T>,
    grad: &[T],
    hess: &[T],
    rows: Vec<u32>,
    features: &[usize],
    params: &GbtParams,
) -> RegressionTree<T> {
    let crit = NewtonCriterion {
        grad,
        hess,
        lambda: T::from_f64_lossy(params.lambda),
        min_child_weight: T::from_f64_lossy(params.min_child_weight),
    };
    let limits = GrowLimits {
        max_depth: Some(params.max_depth),
        min_samples_split: 2,
        mtry: None,
        seed: 0,
    };
    grow_tree(&crit, cols, rows, features, &limits).tree
}

/// Row and column subsets for one tree, drawn from its own seed stream.
pub fn tree_sample(n: usize, d: usize, params: &GbtParams, round: usize, class: usize) -> (Vec<u32>, Vec<usize>) {
    let mut rng = stream_rng(params.seed, (round * K + class) as u64);
    let rows: Vec<u32> = if params.subsample < 1.0 {
        let take = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
        let mut r: Vec<u32> = sample(&mut rng, n, take).into_iter().map(|i| i as u32).collect();
        r.sort_unstable();
        r
    } else {
        (0..n as u32).collect()
    };
    let features: Vec<usize> = if params.colsample_bytree < 1.0 {
        let take = ((params.colsample_bytree * d as f64).floor() as usize).clamp(1, d);
        let mut f = sample(&mut rng, d, take).into_vec();
        f.sort_unstable();
        f
    } else {
        (0..d).collect()
    };
    (rows, features)
}

fn log_priors<T: Scalar>(labels: &[ClassLabel]) -> ClassScores<T> {
    let mut counts = [0usize; K];
    for l in labels {
        counts[l.index()] += 1;
    }
    let n = labels.len().max(1) as f64;
    let mut base = [T::zero(); K];
    for (b, &c) in base.iter_mut().zip(&counts) {
        *b = T::from_f64_lossy((c as f64 / n).max(MIN_PRIOR).ln());
    }
    base
}

/// Training cross-entropy before the first round and after each round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostTrace<T> {
    pub losses: Vec<T>,
}

pub fn train_gbt<T: Scalar>(x: &DesignMatrix<T>, params: &GbtParams) -> Result<(GbtModel<T>, BoostTrace<T>)> {
    if x.n_rows() == 0 {
        return Err(Error::Empty);
    }
    params.validate()?;
    let cols = BinnedColumns::new(x);
    train_gbt_on(&cols, x, params)
}

pub(crate) fn train_gbt_on<T: Scalar>(
    cols: &BinnedColumns<T>,
    x: &DesignMatrix<T>,
    params: &GbtParams,
) -> Result<(GbtModel<T>, BoostTrace<T>)> {
    let n = x.n_rows();
    let d = x.n_cols();
    let labels = x.labels();
    let eta = T::from_f64_lossy(params.learning_rate);
    let base = log_priors::<T>(labels);
    let mut scores = vec![base; n];
    let mut trace = BoostTrace {
        losses: vec![cross_entropy(&scores, labels)],
    };
    let mut rounds = Vec::with_capacity(params.n_rounds);

    for round in 0..params.n_rounds {
        let (g, h) = softmax_grad_hess(&scores, labels)?;
        let trees: Vec<RegressionTree<T>> = (0..K)
            .into_par_iter()
            .map(|k| {
                let gk: Vec<T> = g.iter().map(|r| r[k]).collect();
                let hk: Vec<T> = h.iter().map(|r| r[k]).collect();
                let (rows, features) = tree_sample(n, d, params, round, k);
                fit_gradient_tree(cols, &gk, &hk, rows, &features, params)
            })
            .collect();
        for (s, row) in scores.iter_mut().zip(x.rows()) {
            for (k, tree) in trees.iter().enumerate() {
                s[k] += eta * *tree.leaf_for(row);
            }
        }
        let loss = cross_entropy(&scores, labels);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("boosting diverged at round {round}")));
        }
        trace.losses.push(loss);
        rounds.push(trees);
    }

    Ok((
        GbtModel {
            dim: d,
            params: params.clone(),
            base_score: base,
            learning_rate: eta,
            rounds,
        },
        trace,
    ))
}

pub fn gbt_predict_proba<T: Scalar>(m: &GbtModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassScores<T>>> {
    x.ensure_cols(m.dim)?;
    Ok(x.rows()
        .map(|row| {
            let mut s = m.raw_scores(row);
            softmax_in_place(&mut s);
            s
        })
        .collect())
}

pub fn gbt_predict<T: Scalar>(m: &GbtModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassLabel>> {
    Ok(gbt_predict_proba(m, x)?.iter().map(|p| argmax(p)).collect())
}
