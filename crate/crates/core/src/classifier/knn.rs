use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierError, Dataset, Distribution};
use crate::pipeline::{FeatureVector, N_FEATURES};
use crate::tech::Technology;

/// k-nearest-neighbour vote over z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: Vec<usize>,
    pub mean: [f64; N_FEATURES],
    pub scale: [f64; N_FEATURES],
    pub points: Vec<[f64; N_FEATURES]>,
    pub labels: Vec<Technology>,
}

pub fn train_knn(data: &Dataset, k: usize, features: Option<Vec<usize>>) -> Result<KnnModel, ClassifierError> {
    data.validate()?;
    if k == 0 {
        return Err(ClassifierError::InvalidParameter("k must be >= 1".into()));
    }
    let features = features.unwrap_or_else(|| (0..N_FEATURES).collect());
    let n = data.len() as f64;
    let mut mean = [0.0; N_FEATURES];
    let mut scale = [1.0; N_FEATURES];
    for f in 0..N_FEATURES {
        mean[f] = data.rows.iter().map(|r| r.features.0[f]).sum::<f64>() / n;
        let var = data
            .rows
            .iter()
            .map(|r| (r.features.0[f] - mean[f]).powi(2))
            .sum::<f64>()
            / n;
        if var > 0.0 {
            scale[f] = var.sqrt();
        }
    }
    let model = KnnModel {
        k,
        features,
        mean,
        scale,
        points: vec![],
        labels: data.rows.iter().map(|r| r.label).collect(),
    };
    let points = data.rows.iter().map(|r| model.standardize(&r.features)).collect();
    Ok(KnnModel { points, ..model })
}

impl KnnModel {
    fn standardize(&self, fv: &FeatureVector) -> [f64; N_FEATURES] {
        std::array::from_fn(|f| (fv.0[f] - self.mean[f]) / self.scale[f])
    }
}

impl Classifier for KnnModel {
    fn distribution(&self, fv: &FeatureVector) -> Distribution {
        let z = self.standardize(fv);
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (self.features.iter().map(|&f| (p[f] - z[f]).powi(2)).sum(), i))
            .collect();
        let k = self.k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let mut dist = [0.0; Technology::COUNT];
        for &(_, i) in &d[..k] {
            dist[self.labels[i].index()] += 1.0 / k as f64;
        }
        dist
    }

    fn operations(&self, _fv: &FeatureVector) -> usize {
        self.points.len()
    }
}
