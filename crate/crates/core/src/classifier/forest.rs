use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::grow;
use super::{ClassificationTree, Classifier, ClassifierError, Dataset, Distribution, TreeParams};
use crate::pipeline::FeatureVector;
use crate::tech::Technology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    /// Features drawn per split; `None` means round(sqrt(#allowed)).
    pub features_per_split: Option<usize>,
}

impl ForestParams {
    /// Bootstrapped, fully grown trees considering three features per split.
    pub fn standard(n_trees: usize) -> Self {
        ForestParams {
            n_trees,
            tree: TreeParams {
                max_splits: usize::MAX,
                max_depth: None,
                min_leaf: 1,
                features: None,
            },
            bootstrap: true,
            features_per_split: Some(3),
        }
    }
}

/// Bagged ensemble; predicts the mean of member leaf distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<ClassificationTree>,
}

impl Classifier for Forest {
    fn distribution(&self, fv: &FeatureVector) -> Distribution {
        let mut acc = [0.0; Technology::COUNT];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.distribution(fv)) {
                *a += p;
            }
        }
        let n = self.trees.len().max(1) as f64;
        acc.map(|a| a / n)
    }

    fn operations(&self, fv: &FeatureVector) -> usize {
        self.trees.iter().map(|t| t.operations(fv)).sum()
    }
}

pub fn train_forest(data: &Dataset, params: &ForestParams, seed: u64) -> Result<Forest, ClassifierError> {
    data.validate()?;
    if params.n_trees == 0 {
        return Err(ClassifierError::InvalidParameter("n_trees must be >= 1".into()));
    }
    let n_allowed = params.tree.allowed_features().len();
    let per_split = params
        .features_per_split
        .unwrap_or_else(|| (n_allowed as f64).sqrt().round() as usize)
        .clamp(1, n_allowed.max(1));
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let n = data.len();
            let rows = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(data, rows, &params.tree, Some((&mut rng, per_split)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest { trees })
}
