use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{argmax, train_forest, train_tree, Classifier, ClassifierError, Dataset, ForestParams, Model, TreeParams};
use crate::pipeline::N_ENVELOPE_FEATURES;
use crate::tech::Technology;

/// Minimum number of classifications timed for a speed figure.
pub const SPEED_MIN_CLASSIFICATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Per-class recall for classes present in the test set.
    pub recall: BTreeMap<Technology, f64>,
    /// `confusion[truth][predicted]`.
    pub confusion: [[u64; Technology::COUNT]; Technology::COUNT],
    /// Mean comparisons (trees) or distance evaluations (k-NN) per burst.
    pub mean_operations: f64,
    /// Classifications per second of wall-clock time; not reproducible.
    pub bursts_per_second: f64,
}

/// Accuracy, recall and confusion over `test`, plus throughput measured
/// over at least `min_classifications` predictions.
pub fn evaluate_with<C: Classifier + ?Sized>(
    model: &C,
    test: &Dataset,
    min_classifications: usize,
) -> Result<Metrics, ClassifierError> {
    test.validate()?;
    let mut confusion = [[0u64; Technology::COUNT]; Technology::COUNT];
    let mut ops = 0usize;
    for r in &test.rows {
        let (pred, _) = argmax(&model.distribution(&r.features));
        confusion[r.label.index()][pred.index()] += 1;
        ops += model.operations(&r.features);
    }
    let correct: u64 = (0..Technology::COUNT).map(|i| confusion[i][i]).sum();
    let mut recall = BTreeMap::new();
    for t in Technology::ALL {
        let row: u64 = confusion[t.index()].iter().sum();
        if row > 0 {
            recall.insert(t, confusion[t.index()][t.index()] as f64 / row as f64);
        }
    }

    let passes = min_classifications.div_ceil(test.len()).max(1);
    let start = Instant::now();
    for _ in 0..passes {
        for r in &test.rows {
            black_box(argmax(&model.distribution(black_box(&r.features))));
        }
    }
    let elapsed = start.elapsed().as_secs_f64().max(1e-9);

    Ok(Metrics {
        accuracy: correct as f64 / test.len() as f64,
        recall,
        confusion,
        mean_operations: ops as f64 / test.len() as f64,
        bursts_per_second: (passes * test.len()) as f64 / elapsed,
    })
}

pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &Dataset) -> Result<Metrics, ClassifierError> {
    evaluate_with(model, test, SPEED_MIN_CLASSIFICATIONS)
}

/// Trains the same split-capped tree with and without the spectral
/// features; returns `(full, envelope_only)` metrics.
pub fn ablate_spectral_features(
    train: &Dataset,
    test: &Dataset,
    max_splits: usize,
    min_classifications: usize,
) -> Result<(Metrics, Metrics), ClassifierError> {
    let full = train_tree(train, &TreeParams::with_splits(max_splits))?;
    let mut p = TreeParams::with_splits(max_splits);
    p.features = Some((0..N_ENVELOPE_FEATURES).collect());
    let envelope = train_tree(train, &p)?;
    Ok((
        evaluate_with(&full, test, min_classifications)?,
        evaluate_with(&envelope, test, min_classifications)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub complexity: usize,
    pub metrics: Metrics,
}

/// Accuracy / speed over tree split caps and forest sizes.
pub fn sweep_complexity(
    train: &Dataset,
    test: &Dataset,
    split_caps: &[usize],
    forest_sizes: &[usize],
    seed: u64,
    min_classifications: usize,
) -> Result<Vec<SweepRow>, ClassifierError> {
    let mut rows = Vec::new();
    for &k in split_caps {
        let m = Model::Tree(train_tree(train, &TreeParams::with_splits(k))?);
        rows.push(SweepRow {
            model: "tree".into(),
            complexity: k,
            metrics: evaluate_with(&m, test, min_classifications)?,
        });
    }
    for &n in forest_sizes {
        let m = Model::Forest(train_forest(train, &ForestParams::standard(n), seed)?);
        rows.push(SweepRow {
            model: "forest".into(),
            complexity: n,
            metrics: evaluate_with(&m, test, min_classifications)?,
        });
    }
    Ok(rows)
}
