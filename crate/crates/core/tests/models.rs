use ids_core::ensemble::{cross_entropy, softmax_grad_hess, train_forest, train_gbt, ForestParams, GbtParams};
use ids_core::linear::{gradient, nll_loss, train_logreg, LogRegModel, LogRegTrainConfig};
use ids_core::model::{ModelFile, ModelKind, TrainedModel};
use ids_core::preprocess::PipelineState;
use ids_core::rng::stream_rng;
use ids_core::synth::{generate, SynthConfig};
use ids_core::tree::{self, TreeParams};
use ids_core::{ClassLabel, DesignMatrix, Error, Scalar};
use rand::Rng;

fn random_instance(seed: u64) -> (DesignMatrix<f64>, LogRegModel<f64>) {
    let mut rng = stream_rng(seed, 0);
    let n = rng.gen_range(1..=10);
    let d = rng.gen_range(1..=5);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = (0..n).map(|_| ClassLabel::from_index(rng.gen_range(0..5)).unwrap()).collect();
    let mut m = LogRegModel::zeros(d, rng.gen_range(0.0..0.5));
    m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
    m.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
    (DesignMatrix::from_rows(&rows, labels).unwrap(), m)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn logreg_gradient_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..50 {
        let (x, m) = random_instance(seed);
        let g = gradient(&m, &x).unwrap();
        for i in 0..m.weights.len() {
            let mut up = m.clone();
            up.weights[i] += h;
            let mut down = m.clone();
            down.weights[i] -= h;
            let fd = (nll_loss(&up, &x).unwrap() - nll_loss(&down, &x).unwrap()) / (2.0 * h);
            assert!(rel_err(fd, g.weights[i]) < 1e-5, "seed {seed} w{i}: {fd} vs {}", g.weights[i]);
        }
        for k in 0..5 {
            let mut up = m.clone();
            up.bias[k] += h;
            let mut down = m.clone();
            down.bias[k] -= h;
            let fd = (nll_loss(&up, &x).unwrap() - nll_loss(&down, &x).unwrap()) / (2.0 * h);
            assert!(rel_err(fd, g.bias[k]) < 1e-5, "seed {seed} b{k}");
        }
    }
}

#[test]
fn boosting_grad_hess_match_central_differences() {
    let h = 1e-5;
    let mut rng = stream_rng(3, 0);
    for _ in 0..50 {
        let n = rng.gen_range(1..=10);
        let scores: Vec<[f64; 5]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-3.0..3.0))).collect();
        let labels: Vec<ClassLabel> = (0..n).map(|_| ClassLabel::from_index(rng.gen_range(0..5)).unwrap()).collect();
        let (g, hess) = softmax_grad_hess(&scores, &labels).unwrap();
        for i in 0..n {
            for k in 0..5 {
                let shifted = |delta: f64| {
                    let mut s = scores[i];
                    s[k] += delta;
                    s
                };
                let row_loss = |s: [f64; 5]| cross_entropy(&[s], &[labels[i]]);
                let fd_g = (row_loss(shifted(h)) - row_loss(shifted(-h))) / (2.0 * h);
                assert!(rel_err(fd_g, g[i][k]) < 1e-4);
                let grad_k = |s: [f64; 5]| softmax_grad_hess(&[s], &[labels[i]]).unwrap().0[0][k];
                let fd_h = (grad_k(shifted(h)) - grad_k(shifted(-h))) / (2.0 * h);
                assert!(rel_err(fd_h, hess[i][k]) < 1e-4);
            }
        }
    }
}

fn synth_matrix<T: Scalar>(rows: usize, seed: u64) -> (PipelineState, DesignMatrix<T>) {
    let ds = generate(&SynthConfig {
        rows,
        seed,
        ..Default::default()
    })
    .unwrap();
    let p = PipelineState::fit(&ds).unwrap();
    let (x, _) = p.transform(&ds).unwrap();
    (p, x)
}

fn trained_models<T: Scalar>(x: &DesignMatrix<T>) -> Vec<TrainedModel<T>> {
    let lr = train_logreg(x, &LogRegTrainConfig { max_iters: 20, ..Default::default() }).unwrap().0;
    let cart = tree::grow(x, &TreeParams::cart_default()).unwrap();
    let rf = train_forest(x, &ForestParams { n_trees: 4, seed: 1, ..Default::default() }).unwrap();
    let gbt = train_gbt(x, &GbtParams { n_rounds: 3, seed: 1, ..Default::default() }).unwrap().0;
    vec![TrainedModel::Logreg(lr), TrainedModel::Cart(cart), TrainedModel::Rf(rf), TrainedModel::Gbt(gbt)]
}

fn round_trip_all<T: Scalar>() {
    let (p, x) = synth_matrix::<T>(300, 1);
    for (model, kind) in trained_models(&x).into_iter().zip(ModelKind::ALL) {
        assert_eq!(model.kind(), kind);
        let before = model.predict_proba(&x).unwrap();
        let file = ModelFile::new(model, &kind.name(), 1, &p).unwrap();
        let bytes = file.to_json_bytes().unwrap();
        let back = ModelFile::<T>::from_json_bytes(&bytes).unwrap();
        back.check_pipeline(&p).unwrap();
        assert_eq!(back.to_json_bytes().unwrap(), bytes, "{kind}");
        assert_eq!(back.model.predict_proba(&x).unwrap(), before, "{kind}");
    }
}

#[test]
fn model_files_round_trip_f64() {
    round_trip_all::<f64>();
}

#[test]
fn model_files_round_trip_f32() {
    round_trip_all::<f32>();
}

#[test]
fn foreign_pipeline_is_rejected() {
    let (p, x) = synth_matrix::<f64>(200, 1);
    let (other, _) = synth_matrix::<f64>(200, 2);
    let cart = tree::grow(&x, &TreeParams::cart_default()).unwrap();
    let file = ModelFile::new(TrainedModel::Cart(cart), &TreeParams::cart_default(), 0, &p).unwrap();
    assert!(matches!(file.check_pipeline(&other), Err(Error::DigestMismatch { .. })));
}

#[test]
fn boosting_loss_never_increases_without_subsampling() {
    let (_, x) = synth_matrix::<f64>(500, 21);
    let params = GbtParams { n_rounds: 30, ..Default::default() }.without_subsampling();
    let (_, trace) = train_gbt(&x, &params).unwrap();
    for (r, w) in trace.losses.windows(2).enumerate() {
        assert!(w[1] <= w[0], "round {r}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn training_is_deterministic() {
    let (_, x) = synth_matrix::<f64>(400, 9);
    assert_eq!(trained_models(&x), trained_models(&x));
}
