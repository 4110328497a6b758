//! Random forest and Newton-boosted tree ensembles.

mod forest;
mod gbt;

pub use forest::{
    bootstrap_indices, default_mtry, forest_predict, forest_predict_proba, train_forest, ForestModel, ForestParams,
    RowSampling,
};
pub use gbt::{
    cross_entropy, fit_gradient_tree, gbt_predict, gbt_predict_proba, leaf_weight, softmax_grad_hess, train_gbt,
    tree_sample, BoostTrace, GbtModel, GbtParams, GradHess, GradStats, RegressionTree,
};
