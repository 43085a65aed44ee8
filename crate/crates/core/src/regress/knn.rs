//! k-nearest-neighbour regression with Euclidean distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_matrix, stable_mean, TrainingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5 }
    }
}

/// Stores the training rows; prediction averages the labels of the `k`
/// closest rows. Equal distances are resolved toward the lower row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl KnnModel {
    pub fn fit(data: &TrainingSet, config: &KnnConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::TooFewSamples { need: 1, got: 0 });
        }
        Ok(KnnModel {
            k: config.k.min(data.len()),
            n_features: data.n_features(),
            features: data.features().to_vec(),
            labels: data.labels().to_vec(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Training row indices of the neighbours of `x`, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .chunks(self.n_features)
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_matrix(features, self.n_features)?;
        Ok(features
            .par_chunks(self.n_features)
            .map(|x| stable_mean(self.neighbours(x).into_iter().map(|i| self.labels[i])))
            .collect())
    }
}
