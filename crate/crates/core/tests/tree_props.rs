use ids_core::ensemble::{forest_predict_proba, train_forest, ForestParams, RowSampling};
use ids_core::tree::{self, find_best_split, TreeNode, TreeParams};
use ids_core::{ClassLabel, DesignMatrix};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DesignMatrix<f64>> {
    (2usize..60, 1usize..6).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..8).prop_map(|v| v as f64 * 0.25), d), n),
            prop::collection::vec(0usize..5, n),
        )
            .prop_map(|(rows, y)| {
                let labels = y.into_iter().map(|i| ClassLabel::from_index(i).unwrap()).collect();
                DesignMatrix::from_rows(&rows, labels).unwrap()
            })
    })
}

fn leaf_rows(t: &ids_core::CartF64) -> Vec<u32> {
    t.leaves().map(|l| l.counts.iter().sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_split_matches_sort_oracle(x in matrix(), leaf in 1usize..4) {
        let params = TreeParams {
            max_depth: Some(1),
            min_samples_leaf: leaf,
            min_samples_split: 2,
            mtry: None,
            seed: 0,
        };
        let t = tree::grow(&x, &params).unwrap();
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let features: Vec<usize> = (0..x.n_cols()).collect();
        let oracle = find_best_split(&x, &rows, &features, &params);
        match (&t.nodes[0], oracle) {
            (TreeNode::Internal { feature, threshold, .. }, Some(s)) => {
                prop_assert_eq!(*feature, s.feature);
                prop_assert_eq!(*threshold, s.threshold);
            }
            (TreeNode::Leaf(_), None) => {}
            (node, oracle) => prop_assert!(false, "tree {:?} vs oracle {:?}", node, oracle),
        }
    }

    #[test]
    fn limits_are_respected(x in matrix(), leaf in 1usize..5, depth in 1usize..6) {
        let params = TreeParams {
            max_depth: Some(depth),
            min_samples_leaf: leaf,
            min_samples_split: 2 * leaf,
            mtry: None,
            seed: 0,
        };
        let t = tree::grow(&x, &params).unwrap();
        t.validate().unwrap();
        prop_assert!(t.depth() <= depth);
        prop_assert_eq!(leaf_rows(&t).iter().sum::<u32>() as usize, x.n_rows());
        if t.n_leaves() > 1 {
            prop_assert!(leaf_rows(&t).iter().all(|&n| n as usize >= leaf));
        }
        for p in tree::predict_proba(&t, &x).unwrap() {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_leaves_are_pure_or_unsplittable(x in matrix()) {
        let params = TreeParams::unconstrained();
        let t = tree::grow(&x, &params).unwrap();
        let features: Vec<usize> = (0..x.n_cols()).collect();
        let mut groups: Vec<(*const ids_core::tree::ClassLeaf<f64>, Vec<usize>)> = Vec::new();
        for i in 0..x.n_rows() {
            let leaf: *const _ = t.leaf_for(x.row(i));
            match groups.iter_mut().find(|(l, _)| *l == leaf) {
                Some((_, rows)) => rows.push(i),
                None => groups.push((leaf, vec![i])),
            }
        }
        prop_assert_eq!(groups.len(), t.n_leaves());
        for (_, rows) in groups {
            let pure = rows.iter().all(|&r| x.labels()[r] == x.labels()[rows[0]]);
            prop_assert!(pure || find_best_split(&x, &rows, &features, &params).is_none());
        }
    }

    #[test]
    fn identity_forest_of_one_is_cart(x in matrix(), leaf in 1usize..3) {
        let forest = ForestParams {
            n_trees: 1,
            mtry: Some(x.n_cols()),
            max_depth: Some(8),
            min_samples_leaf: leaf,
            min_samples_split: 2 * leaf,
            sampling: RowSampling::Identity,
            seed: 5,
        };
        let cart = TreeParams {
            max_depth: Some(8),
            min_samples_leaf: leaf,
            min_samples_split: 2 * leaf,
            mtry: None,
            seed: 0,
        };
        let f = train_forest(&x, &forest).unwrap();
        let t = tree::grow(&x, &cart).unwrap();
        prop_assert_eq!(forest_predict_proba(&f, &x).unwrap(), tree::predict_proba(&t, &x).unwrap());
    }
}

#[test]
fn forest_is_reproducible() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 13) as f64, (i % 7) as f64, (i % 5) as f64]).collect();
    let labels = (0..200).map(|i| ClassLabel::from_index((i * 7 % 13) % 5).unwrap()).collect();
    let x = DesignMatrix::from_rows(&rows, labels).unwrap();
    let params = ForestParams { n_trees: 8, seed: 11, ..Default::default() };
    let a = train_forest(&x, &params).unwrap();
    let b = train_forest(&x, &params).unwrap();
    assert_eq!(a, b);
    let c = train_forest(&x, &ForestParams { seed: 12, ..params }).unwrap();
    assert_ne!(a.trees, c.trees);
}
