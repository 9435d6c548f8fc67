//! TF-IDF features with a random forest on top.

pub mod forest;
pub mod tfidf;
pub mod tree;

pub use forest::{
    fit_baseline, forest_predict_proba, predict_label, train_forest, ForestModel, ForestParams, MaxFeatures, RandomForest,
    DEFAULT_TREES,
};
pub use tfidf::{fit_tfidf, tfidf_transform, transform_source, SparseVector, TfidfModel};
pub use tree::{DecisionTree, Node};
