//! Regression models mapping encoded cells to accuracies.
//!
//! [`forest`] is the predictor used for the main results; [`linear`] and
//! [`knn`] are baselines for the ablation grid. All of them train on a
//! [`TrainingSet`] and predict from a row-major feature matrix.

pub mod forest;
pub mod knn;
pub mod linear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use knn::{KnnConfig, KnnModel};
pub use linear::{LinearConfig, LinearModel};

/// Whether a training row is an original cell or one of its homogeneous forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Augmented,
}

/// Feature matrix plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<f64>,
    origin: Vec<Origin>,
}

impl TrainingSet {
    /// `features` is row-major with `n_features` columns.
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<f64>, origin: Vec<Origin>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Dimension {
                expected: labels.len() * n_features,
                got: features.len(),
            });
        }
        if origin.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: origin.len(),
            });
        }
        if let Some(row) = labels.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite { row });
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: pos / n_features });
        }
        Ok(TrainingSet {
            features,
            n_features,
            labels,
            origin,
        })
    }

    /// All rows tagged [`Origin::Original`].
    pub fn originals(features: Vec<f64>, n_features: usize, labels: Vec<f64>) -> Result<Self> {
        let origin = vec![Origin::Original; labels.len()];
        Self::new(features, n_features, labels, origin)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_original(&self) -> usize {
        self.origin.iter().filter(|o| **o == Origin::Original).count()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }
}

pub(crate) fn check_matrix(features: &[f64], n_features: usize) -> Result<usize> {
    if n_features == 0 || !features.len().is_multiple_of(n_features) {
        return Err(Error::Dimension {
            expected: n_features,
            got: if n_features == 0 { features.len() } else { features.len() % n_features },
        });
    }
    Ok(features.len() / n_features)
}

/// Running mean that returns `x` exactly when every input equals `x` and
/// never leaves `[min, max]` of its inputs.
pub(crate) fn stable_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    for (k, x) in values.into_iter().enumerate() {
        if k == 0 {
            m = x;
        } else {
            m += (x - m) / (k as f64 + 1.0);
        }
    }
    m
}

/// Which regressor to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Linear,
    Knn,
}

/// A trained regressor of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Rf(ForestModel),
    Linear(LinearModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rf(_) => ModelKind::Rf,
            Model::Linear(_) => ModelKind::Linear,
            Model::Knn(_) => ModelKind::Knn,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Rf(m) => m.n_features(),
            Model::Linear(m) => m.n_features(),
            Model::Knn(m) => m.n_features(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Rf(m) => m.predict(features),
            Model::Linear(m) => m.predict(features),
            Model::Knn(m) => m.predict(features),
        }
    }
}

/// Configuration shared by [`fit`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressConfig {
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub knn: KnnConfig,
}

/// Trains the chosen model kind.
pub fn fit(data: &TrainingSet, kind: ModelKind, config: &RegressConfig, seed: u64) -> Result<Model> {
    Ok(match kind {
        ModelKind::Rf => Model::Rf(fit_forest(data, &config.forest, seed)?),
        ModelKind::Linear | ModelKind::Knn => fit_baseline(data, kind, config)?,
    })
}

/// Least squares or k-nearest-neighbour baseline.
pub fn fit_baseline(data: &TrainingSet, kind: ModelKind, config: &RegressConfig) -> Result<Model> {
    match kind {
        ModelKind::Linear => Ok(Model::Linear(LinearModel::fit(data, &config.linear)?)),
        ModelKind::Knn => Ok(Model::Knn(KnnModel::fit(data, &config.knn)?)),
        ModelKind::Rf => Err(Error::Config("random forest is not a baseline".into())),
    }
}
