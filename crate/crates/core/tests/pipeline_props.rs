use ids_core::dataset::{class_distribution, read_nslkdd, write_nslkdd, AttackTaxonomy, FeatureKind, FeatureSchema};
use ids_core::preprocess::{stratified_split, validation_quota, PipelineState, SplitSpec};
use ids_core::synth::{generate, SynthConfig};
use ids_core::ClassLabel;
use proptest::prelude::*;

fn synth(rows: usize, seed: u64) -> ids_core::LabeledDataset {
    generate(&SynthConfig {
        rows,
        seed,
        ..Default::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn split_partitions_each_class(y in prop::collection::vec(0usize..5, 1..400), frac in 0.01f64..0.99, seed: u64) {
        let labels: Vec<ClassLabel> = y.iter().map(|&i| ClassLabel::from_index(i).unwrap()).collect();
        let s = stratified_split(&labels, &SplitSpec::new(frac, seed).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.valid).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        prop_assert!(s.train.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.valid.windows(2).all(|w| w[0] < w[1]));
        for c in ClassLabel::ALL {
            let n = labels.iter().filter(|&&l| l == c).count();
            let v = s.valid.iter().filter(|&&i| labels[i] == c).count();
            prop_assert_eq!(v, validation_quota(n, frac));
        }
        prop_assert_eq!(&s, &stratified_split(&labels, &SplitSpec::new(frac, seed).unwrap()));
    }

    #[test]
    fn scaled_training_matrix_is_in_unit_box(seed in 0u64..1000) {
        let ds = synth(150, seed);
        let p = PipelineState::fit(&ds).unwrap();
        let (x, unseen) = p.transform::<f64>(&ds).unwrap();
        prop_assert_eq!(unseen.total(), 0);
        prop_assert_eq!(x.n_cols(), p.width());
        prop_assert!(x.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // exactly one active indicator per categorical block
        let numeric = p.encoder.numeric.len();
        for i in 0..x.n_rows() {
            let mut start = numeric;
            for vocab in &p.encoder.vocabularies {
                let block = &x.row(i)[start..start + vocab.tokens.len()];
                prop_assert_eq!(block.iter().filter(|&&v| v == 1.0).count(), 1);
                prop_assert_eq!(block.iter().filter(|&&v| v == 0.0).count(), block.len() - 1);
                start += vocab.tokens.len();
            }
        }
    }
}

#[test]
fn width_counts_numeric_and_vocabularies() {
    let ds = synth(1_000, 4);
    let p = PipelineState::fit(&ds).unwrap();
    let schema = FeatureSchema::nsl_kdd();
    let numeric = schema.features.iter().filter(|f| f.kind != FeatureKind::Categorical).count();
    assert_eq!(numeric, 38);
    let vocab: usize = p.encoder.vocabularies.iter().map(|v| v.tokens.len()).sum();
    assert_eq!(p.width(), numeric + vocab);
}

#[test]
fn pipeline_is_byte_stable() {
    let ds = synth(400, 2);
    let a = PipelineState::fit(&ds).unwrap();
    let b = PipelineState::fit(&ds).unwrap();
    assert_eq!(a.to_json_bytes(), b.to_json_bytes());
    assert_eq!(a.digest(), b.digest());
    let back = PipelineState::from_json_bytes(&a.to_json_bytes()).unwrap();
    assert_eq!(back, a);
    let other = PipelineState::fit(&synth(400, 3)).unwrap();
    assert_ne!(other.digest(), a.digest());
}

#[test]
fn test_rows_reuse_training_state() {
    let train = synth(600, 7);
    let p = PipelineState::fit(&train).unwrap();
    let mut test = synth(50, 8);
    if let ids_core::dataset::Cell::Token(t) = &mut test.records[0].values[2] {
        *t = "unseen_service".into();
    }
    let (x, unseen) = p.transform::<f64>(&test).unwrap();
    assert_eq!(unseen.total(), 1);
    assert_eq!(x.n_cols(), p.width());
    let refit = PipelineState::fit(&train).unwrap();
    assert_eq!(refit, p);
}

#[test]
fn text_round_trip_preserves_distribution() {
    let ds = synth(800, 5);
    let mut text = Vec::new();
    write_nslkdd(&mut text, &ds).unwrap();
    let back = read_nslkdd(text.as_slice(), &FeatureSchema::nsl_kdd(), &AttackTaxonomy::nsl_kdd(), None).unwrap();
    assert_eq!(class_distribution(&back), class_distribution(&ds));
    assert_eq!(back.len(), 800);
}
