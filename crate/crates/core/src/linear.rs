//! Multinomial logistic regression with an L2 penalty on the weights.
//!
//! Objective: mean cross-entropy of the row-wise softmax plus
//! `lambda / 2 * ||W||^2` (bias unpenalized). Training is full-batch gradient
//! descent from zero with Armijo backtracking; the first trial step of each
//! iteration is the Barzilai-Borwein step, so accepted iterates still satisfy
//! the sufficient-decrease test and the loss never increases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;
use crate::scalar::Scalar;

const K: usize = NUM_CLASSES;

/// Rows per block in parallel reductions; blocks are summed in index order.
const BLOCK_ROWS: usize = 4096;

pub type ClassScores<T> = [T; NUM_CLASSES];

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(scores: &[T]) -> ClassLabel {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    ClassLabel::from_index(best).expect("score vector has NUM_CLASSES entries")
}

/// Numerically stable softmax (max-subtracted), in place.
pub fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

/// `log(sum(exp(z)))`, stable.
pub fn log_sum_exp<T: Scalar>(z: &[T]) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel<T> {
    pub dim: usize,
    /// `K x dim`, row-major by class.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub lambda: T,
}

impl<T: Scalar> LogRegModel<T> {
    pub fn zeros(dim: usize, lambda: T) -> Self {
        LogRegModel {
            dim,
            weights: vec![T::zero(); K * dim],
            bias: vec![T::zero(); K],
            lambda,
        }
    }

    #[inline]
    pub fn class_weights(&self, k: usize) -> &[T] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn scores(&self, x: &[T]) -> ClassScores<T> {
        let mut z = [T::zero(); K];
        for (k, zk) in z.iter_mut().enumerate() {
            let w = self.class_weights(k);
            let mut acc = self.bias[k];
            for (&wi, &xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *zk = acc;
        }
        z
    }

    fn check(&self, x: &DesignMatrix<T>) -> Result<()> {
        x.ensure_cols(self.dim)
    }

    fn penalty(&self) -> T {
        let sq: T = self.weights.iter().map(|&w| w * w).sum();
        self.lambda * T::half() * sq
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Gradient<T> {
    fn zeros(dim: usize) -> Self {
        Gradient {
            weights: vec![T::zero(); K * dim],
            bias: vec![T::zero(); K],
        }
    }

    fn add_assign(&mut self, other: &Gradient<T>) {
        for (a, &b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn norm_sq(&self) -> T {
        self.weights.iter().chain(&self.bias).map(|&g| g * g).sum()
    }
}

/// Block-wise sum of cross-entropy and (optionally) the un-normalized
/// `(P - Y)^T [X 1]` accumulator.
fn accumulate<T: Scalar>(
    model: &LogRegModel<T>,
    x: &DesignMatrix<T>,
    with_grad: bool,
) -> (T, Option<Gradient<T>>) {
    let d = model.dim;
    let n = x.n_rows();
    let blocks: Vec<(T, Option<Gradient<T>>)> = (0..n.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let mut loss = T::zero();
            let mut grad = with_grad.then(|| Gradient::zeros(d));
            for i in b * BLOCK_ROWS..((b + 1) * BLOCK_ROWS).min(n) {
                let row = x.row(i);
                let y = x.labels()[i].index();
                let mut z = model.scores(row);
                loss += log_sum_exp(&z) - z[y];
                if let Some(g) = grad.as_mut() {
                    softmax_in_place(&mut z);
                    z[y] -= T::one();
                    for (k, &r) in z.iter().enumerate() {
                        g.bias[k] += r;
                        let gw = &mut g.weights[k * d..(k + 1) * d];
                        for (gj, &xj) in gw.iter_mut().zip(row) {
                            *gj += r * xj;
                        }
                    }
                }
            }
            (loss, grad)
        })
        .collect();

    let mut loss = T::zero();
    let mut grad = with_grad.then(|| Gradient::zeros(d));
    for (l, g) in blocks {
        loss += l;
        if let (Some(total), Some(g)) = (grad.as_mut(), g) {
            total.add_assign(&g);
        }
    }
    (loss, grad)
}

fn loss_and_gradient<T: Scalar>(
    model: &LogRegModel<T>,
    x: &DesignMatrix<T>,
    with_grad: bool,
) -> (T, Option<Gradient<T>>) {
    let n = T::from_usize_lossy(x.n_rows().max(1));
    let (sum, grad) = accumulate(model, x, with_grad);
    let loss = sum / n + model.penalty();
    let grad = grad.map(|mut g| {
        for (gw, &w) in g.weights.iter_mut().zip(&model.weights) {
            *gw = *gw / n + model.lambda * w;
        }
        for gb in g.bias.iter_mut() {
            *gb /= n;
        }
        g
    });
    (loss, grad)
}

/// Mean cross-entropy plus `lambda/2 * ||W||^2`.
pub fn nll_loss<T: Scalar>(model: &LogRegModel<T>, x: &DesignMatrix<T>) -> Result<T> {
    model.check(x)?;
    Ok(loss_and_gradient(model, x, false).0)
}

/// `dW = (P - Y)^T X / n + lambda W`, `db = mean(P - Y)`.
pub fn gradient<T: Scalar>(model: &LogRegModel<T>, x: &DesignMatrix<T>) -> Result<Gradient<T>> {
    model.check(x)?;
    Ok(loss_and_gradient(model, x, true).1.expect("gradient requested"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRegTrainConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    /// Trial step for the first iteration.
    pub initial_step: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Unused by the solver, which is deterministic; kept for provenance.
    pub seed: u64,
}

impl Default for LogRegTrainConfig {
    fn default() -> Self {
        LogRegTrainConfig {
            lambda: 1e-4,
            max_iters: 200,
            tolerance: 1e-6,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            seed: 0,
        }
    }
}

impl LogRegTrainConfig {
    /// Penalty equivalent to an inverse regularization strength `c` on the
    /// summed loss over `n` rows.
    pub fn lambda_from_c(c: f64, n: usize) -> f64 {
        1.0 / (c * n.max(1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParam("max_iters must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParam("tolerance must be > 0".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParam("lambda must be >= 0".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParam("backtrack factor must lie in (0,1)".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidParam("initial step must be > 0".into()));
        }
        Ok(())
    }
}

/// Loss at initialization and after every accepted step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace<T> {
    pub losses: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn step_from<T: Scalar>(model: &LogRegModel<T>, g: &Gradient<T>, step: T) -> LogRegModel<T> {
    let mut next = model.clone();
    for (w, &gw) in next.weights.iter_mut().zip(&g.weights) {
        *w -= step * gw;
    }
    for (b, &gb) in next.bias.iter_mut().zip(&g.bias) {
        *b -= step * gb;
    }
    next
}

fn dot_diff<T: Scalar>(a1: &[T], a0: &[T], b1: &[T], b0: &[T]) -> T {
    a1.iter()
        .zip(a0)
        .zip(b1.iter().zip(b0))
        .map(|((&p1, &p0), (&q1, &q0))| (p1 - p0) * (q1 - q0))
        .sum()
}

pub fn train_logreg<T: Scalar>(
    x: &DesignMatrix<T>,
    cfg: &LogRegTrainConfig,
) -> Result<(LogRegModel<T>, TrainTrace<T>)> {
    cfg.validate()?;
    if x.n_rows() == 0 {
        return Err(Error::Empty);
    }
    let mut present = [false; K];
    for l in x.labels() {
        present[l.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidParam("training data needs at least two classes".into()));
    }

    let lambda = T::from_f64_lossy(cfg.lambda);
    let shrink = T::from_f64_lossy(cfg.backtrack);
    let armijo = T::from_f64_lossy(cfg.armijo);
    let tol_sq = T::from_f64_lossy(cfg.tolerance * cfg.tolerance);
    let min_step = T::from_f64_lossy(1e-20);
    let max_step = T::from_f64_lossy(1e8);

    let mut model = LogRegModel::zeros(x.n_cols(), lambda);
    let (mut loss, grad) = loss_and_gradient(&model, x, true);
    let mut grad = grad.expect("gradient requested");
    let mut trace = TrainTrace {
        losses: vec![loss],
        iterations: 0,
        converged: false,
    };
    let mut step = T::from_f64_lossy(cfg.initial_step);
    let mut previous: Option<(LogRegModel<T>, Gradient<T>)> = None;

    for _ in 0..cfg.max_iters {
        let g_sq = grad.norm_sq();
        if g_sq < tol_sq {
            trace.converged = true;
            break;
        }
        if let Some((prev_model, prev_grad)) = &previous {
            let ss = dot_diff(&model.weights, &prev_model.weights, &model.weights, &prev_model.weights)
                + dot_diff(&model.bias, &prev_model.bias, &model.bias, &prev_model.bias);
            let sy = dot_diff(&model.weights, &prev_model.weights, &grad.weights, &prev_grad.weights)
                + dot_diff(&model.bias, &prev_model.bias, &grad.bias, &prev_grad.bias);
            if sy > T::zero() && ss > T::zero() {
                step = (ss / sy).min(max_step);
            }
        }

        let accepted = loop {
            let candidate = step_from(&model, &grad, step);
            let (cand_loss, cand_grad) = loss_and_gradient(&candidate, x, true);
            if !cand_loss.is_finite() && step < min_step {
                return Err(Error::NonFinite("logistic loss became non-finite".into()));
            }
            if cand_loss.is_finite() && cand_loss <= loss - armijo * step * g_sq {
                break Some((candidate, cand_loss, cand_grad.expect("gradient requested")));
            }
            step *= shrink;
            if step < min_step {
                break None;
            }
        };

        let Some((next, next_loss, next_grad)) = accepted else {
            // No representable step decreases the loss: numerically converged.
            trace.converged = true;
            break;
        };
        previous = Some((std::mem::replace(&mut model, next), std::mem::replace(&mut grad, next_grad)));
        loss = next_loss;
        trace.losses.push(loss);
        trace.iterations += 1;
    }

    if !loss.is_finite() || !model.is_finite() {
        return Err(Error::NonFinite("logistic regression diverged".into()));
    }
    Ok((model, trace))
}

pub fn predict_proba<T: Scalar>(model: &LogRegModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassScores<T>>> {
    model.check(x)?;
    Ok(x.rows()
        .map(|row| {
            let mut z = model.scores(row);
            softmax_in_place(&mut z);
            z
        })
        .collect())
}

pub fn predict<T: Scalar>(model: &LogRegModel<T>, x: &DesignMatrix<T>) -> Result<Vec<ClassLabel>> {
    Ok(predict_proba(model, x)?.iter().map(|p| argmax(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn labels(idx: &[usize]) -> Vec<ClassLabel> {
        idx.iter().map(|&i| ClassLabel::from_index(i).unwrap()).collect()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0f64; 5]);
        for v in &p {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let p = softmax(&[2f64.ln(), 0.0, 0.0, 0.0, 0.0]);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        for v in &p[1..] {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
        let z = [0.3f64, -1.2, 4.0, 0.0, 2.5];
        let shifted: Vec<f64> = z.iter().map(|v| v + 1000.0).collect();
        let (a, b) = (softmax(&z), softmax(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_f32() {
        let p = softmax(&[0.0f32; 5]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_model_loss_is_ln5() {
        let x = DesignMatrix::from_rows(&[vec![0.3, 1.0], vec![2.0, -1.0]], labels(&[0, 3])).unwrap();
        let m = LogRegModel::zeros(2, 0.7);
        assert!((nll_loss(&m, &x).unwrap() - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_row_half_probability_loss_is_ln2() {
        // bias ln 4 on class 0 gives p0 = 4 / (4 + 4) = 0.5
        let x = DesignMatrix::from_rows(&[vec![0.0]], labels(&[0])).unwrap();
        let mut m = LogRegModel::zeros(1, 0.0);
        m.bias[0] = 4f64.ln();
        assert!((nll_loss(&m, &x).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_prediction_loss_tends_to_zero() {
        let x = DesignMatrix::from_rows(&[vec![0.0]], labels(&[2])).unwrap();
        let mut m = LogRegModel::zeros(1, 0.0);
        m.bias[2] = 50.0;
        assert!(nll_loss(&m, &x).unwrap() < 1e-20);
    }

    #[test]
    fn loss_dimension_mismatch() {
        let x = DesignMatrix::from_rows(&[vec![0.0, 1.0]], labels(&[0])).unwrap();
        let m = LogRegModel::<f64>::zeros(3, 0.0);
        assert!(matches!(nll_loss(&m, &x), Err(Error::Dimension { .. })));
    }

    fn random_instance(seed: u64, rows: usize, cols: usize) -> (DesignMatrix<f64>, LogRegModel<f64>) {
        let mut rng = stream_rng(seed, 0);
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..K)).collect();
        let x = DesignMatrix::from_rows(&data, labels(&y)).unwrap();
        let mut m = LogRegModel::zeros(cols, 0.3);
        for w in m.weights.iter_mut().chain(m.bias.iter_mut()) {
            *w = rng.gen_range(-1.0..1.0);
        }
        (x, m)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-6;
        for seed in 0..5 {
            let (x, m) = random_instance(seed, 10, 4);
            let g = gradient(&m, &x).unwrap();
            for idx in 0..m.weights.len() + K {
                let perturb = |delta: f64| {
                    let mut p = m.clone();
                    if idx < p.weights.len() {
                        p.weights[idx] += delta;
                    } else {
                        p.bias[idx - p.weights.len()] += delta;
                    }
                    nll_loss(&p, &x).unwrap()
                };
                let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
                let an = if idx < m.weights.len() { g.weights[idx] } else { g.bias[idx - m.weights.len()] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-5, "seed {seed} idx {idx}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn balanced_zero_features_give_zero_bias_gradient() {
        let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![0.0, 0.0]).collect();
        let x = DesignMatrix::from_rows(&rows, labels(&[0, 1, 2, 3, 4])).unwrap();
        let g = gradient(&LogRegModel::zeros(2, 0.0), &x).unwrap();
        for b in g.bias {
            assert!(b.abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_term_adds_exactly_w() {
        let (x, mut m) = random_instance(11, 6, 3);
        m.lambda = 0.0;
        let g0 = gradient(&m, &x).unwrap();
        m.lambda = 1.0;
        let g1 = gradient(&m, &x).unwrap();
        for ((a, b), w) in g1.weights.iter().zip(&g0.weights).zip(&m.weights) {
            assert!((a - b - w).abs() < 1e-15);
        }
        assert_eq!(g1.bias, g0.bias);
    }

    #[test]
    fn separable_1d_reaches_full_accuracy() {
        let x = DesignMatrix::from_rows(&[vec![-1.0], vec![1.0]], labels(&[0, 1])).unwrap();
        let cfg = LogRegTrainConfig {
            lambda: 0.01,
            ..Default::default()
        };
        let (m, trace) = train_logreg(&x, &cfg).unwrap();
        assert_eq!(predict(&m, &x).unwrap(), labels(&[0, 1]));
        for w in trace.losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(*trace.losses.last().unwrap() <= trace.losses[0]);
    }

    #[test]
    fn exactly_fittable_data_reaches_small_loss() {
        let x = DesignMatrix::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            labels(&[0, 1, 2, 3]),
        )
        .unwrap();
        let cfg = LogRegTrainConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let (m, trace) = train_logreg(&x, &cfg).unwrap();
        assert!(*trace.losses.last().unwrap() < 0.01, "{:?}", trace.losses.last());
        assert_eq!(predict(&m, &x).unwrap(), labels(&[0, 1, 2, 3]));
    }

    #[test]
    fn huge_lambda_predicts_majority_class() {
        let x = DesignMatrix::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![-4.0]],
            labels(&[1, 1, 1, 0]),
        )
        .unwrap();
        let cfg = LogRegTrainConfig {
            lambda: 1e6,
            ..Default::default()
        };
        let (m, _) = train_logreg(&x, &cfg).unwrap();
        assert!(m.weights.iter().all(|w: &f64| w.abs() < 1e-5));
        assert!(predict(&m, &x).unwrap().iter().all(|&l| l == ClassLabel::DoS));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![2.0]], labels(&[1, 1])).unwrap();
        assert!(train_logreg(&x, &LogRegTrainConfig::default()).is_err());
    }

    #[test]
    fn zero_model_predicts_normal_uniformly() {
        let (x, _) = random_instance(3, 8, 3);
        let m = LogRegModel::zeros(3, 0.0);
        let p = predict_proba(&m, &x).unwrap();
        for row in &p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        }
        assert!(predict(&m, &x).unwrap().iter().all(|&l| l == ClassLabel::Normal));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1f64, 0.4, 0.4, 0.1, 0.0]), ClassLabel::DoS);
        assert_eq!(argmax(&[0.2f64; 5]), ClassLabel::Normal);
    }
}
