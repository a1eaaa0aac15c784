//! Burst-level technology classifiers: split-capped CART trees, random
//! forests and k-NN, with the evaluation harness used to study the
//! accuracy / speed trade-off.

mod dataset;
mod eval;
mod forest;
mod knn;
mod tree;

use serde::{Deserialize, Serialize};

use crate::pipeline::FeatureVector;
use crate::tech::Technology;

pub use dataset::{Dataset, DATASET_CSV_HEADER};
pub use eval::{ablate_spectral_features, evaluate, evaluate_with, sweep_complexity, Metrics, SweepRow};
pub use forest::{train_forest, Forest, ForestParams};
pub use knn::{train_knn, KnnModel};
pub use tree::{train_tree, ClassificationTree, Node, TreeParams, DEFAULT_MIN_LEAF};

/// Class probabilities indexed by [`Technology::index`].
pub type Distribution = [f64; Technology::COUNT];

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need >= 2 classes, dataset has {0}")]
    NeedTwoClasses(usize),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("invalid hyper-parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that maps a feature vector to a class distribution.
pub trait Classifier {
    fn distribution(&self, fv: &FeatureVector) -> Distribution;

    /// Feature comparisons (trees) or distance evaluations (k-NN) spent on
    /// one classification.
    fn operations(&self, fv: &FeatureVector) -> usize;
}

/// Argmax of `dist`; ties resolve to the earliest technology in
/// declaration order.
pub fn argmax(dist: &Distribution) -> (Technology, f64) {
    let mut best = 0;
    for i in 1..dist.len() {
        if dist[i] > dist[best] {
            best = i;
        }
    }
    (Technology::ALL[best], dist[best])
}

/// Predicted technology and its probability.
pub fn classify<C: Classifier + ?Sized>(model: &C, fv: &FeatureVector) -> Result<(Technology, f64), ClassifierError> {
    if !fv.is_finite() {
        return Err(ClassifierError::NonFinite);
    }
    Ok(argmax(&model.distribution(fv)))
}

/// A trained model of any supported family, serializable to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(ClassificationTree),
    Forest(Forest),
    Knn(KnnModel),
}

impl Classifier for Model {
    fn distribution(&self, fv: &FeatureVector) -> Distribution {
        match self {
            Model::Tree(m) => m.distribution(fv),
            Model::Forest(m) => m.distribution(fv),
            Model::Knn(m) => m.distribution(fv),
        }
    }

    fn operations(&self, fv: &FeatureVector) -> usize {
        match self {
            Model::Tree(m) => m.operations(fv),
            Model::Forest(m) => m.operations(fv),
            Model::Knn(m) => m.operations(fv),
        }
    }
}

impl Model {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Model, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_picks_the_largest() {
        let mut d = [0.0; 6];
        d[Technology::Wlan11g.index()] = 0.9;
        d[Technology::Ble.index()] = 0.1;
        assert_eq!(argmax(&d), (Technology::Wlan11g, 0.9));
    }

    #[test]
    fn argmax_ties_follow_declaration_order() {
        let mut d = [0.0; 6];
        d[Technology::Ble.index()] = 0.5;
        d[Technology::Wlan11n.index()] = 0.5;
        assert_eq!(argmax(&d), (Technology::Wlan11n, 0.5));
    }
}
