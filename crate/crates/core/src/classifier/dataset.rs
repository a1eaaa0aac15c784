use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::pipeline::{FeatureVector, LabeledBurst, N_FEATURES};
use crate::tech::{TechSet, Technology};

pub const DATASET_CSV_HEADER: &str = "f1,f2,f3,f4,f5,f6,f7,f8,label";

/// Labeled feature vectors; the training interchange unit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<LabeledBurst>,
}

impl Dataset {
    pub fn new(rows: Vec<LabeledBurst>) -> Self {
        Dataset { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes(&self) -> TechSet {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> [usize; Technology::COUNT] {
        let mut c = [0; Technology::COUNT];
        for r in &self.rows {
            c[r.label.index()] += 1;
        }
        c
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.rows.is_empty() {
            return Err(ClassifierError::EmptyDataset);
        }
        if self.rows.iter().any(|r| !r.features.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
        Ok(())
    }

    /// Errors unless the dataset is usable for supervised training.
    pub fn require_trainable(&self) -> Result<(), ClassifierError> {
        self.validate()?;
        let n = self.classes().iter().count();
        if n < 2 {
            return Err(ClassifierError::NeedTwoClasses(n));
        }
        Ok(())
    }

    /// Per-class shuffled split: `train_fraction` of every class goes to
    /// the first set. Row order inside each half follows the input.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_train = vec![false; self.rows.len()];
        for tech in Technology::ALL {
            let mut idx: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].label == tech).collect();
            idx.shuffle(&mut rng);
            let k = (idx.len() as f64 * train_fraction).round() as usize;
            for &i in &idx[..k] {
                in_train[i] = true;
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (row, t) in self.rows.iter().zip(in_train) {
            if t {
                train.push(*row)
            } else {
                test.push(*row)
            }
        }
        (Dataset::new(train), Dataset::new(test))
    }

    /// Random subset with at most `per_class` rows of each class, in input
    /// order.
    pub fn capped_per_class(&self, per_class: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; self.rows.len()];
        for tech in Technology::ALL {
            let mut idx: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].label == tech).collect();
            idx.shuffle(&mut rng);
            for &i in idx.iter().take(per_class) {
                keep[i] = true;
            }
        }
        Dataset::new(
            self.rows
                .iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(r, _)| *r)
                .collect(),
        )
    }

    /// Copy with `f` applied to every feature vector.
    pub fn map_features(&self, f: impl Fn(&FeatureVector) -> FeatureVector) -> Dataset {
        Dataset::new(
            self.rows
                .iter()
                .map(|r| LabeledBurst {
                    features: f(&r.features),
                    label: r.label,
                })
                .collect(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{DATASET_CSV_HEADER}")?;
        for r in &self.rows {
            for v in r.features.0 {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", r.label)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Dataset, ClassifierError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader.headers()?.clone();
        let expected: Vec<&str> = DATASET_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(ClassifierError::BadRow {
                row: 0,
                msg: format!("expected header `{DATASET_CSV_HEADER}`"),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| ClassifierError::BadRow { row: i + 1, msg };
            let mut f = [0.0; N_FEATURES];
            for (k, slot) in f.iter_mut().enumerate() {
                *slot = rec[k]
                    .trim()
                    .parse()
                    .map_err(|e| bad(format!("column f{}: {e}", k + 1)))?;
            }
            let label = rec[N_FEATURES].trim().parse().map_err(|e| bad(format!("{e}")))?;
            rows.push(LabeledBurst {
                features: FeatureVector(f),
                label,
            });
        }
        Ok(Dataset::new(rows))
    }
}
