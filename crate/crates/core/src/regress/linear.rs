//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_matrix, TrainingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    /// Retry with a small ridge penalty when the normal equations are not
    /// positive definite.
    pub ridge_fallback: bool,
    /// Ridge strength relative to the mean diagonal of `X^T X`.
    pub ridge: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            ridge_fallback: true,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Whether the ridge fallback was needed.
    pub ridged: bool,
}

impl LinearModel {
    pub fn fit(data: &TrainingSet, config: &LinearConfig) -> Result<Self> {
        let n = data.len();
        let d = data.n_features();
        if n == 0 {
            return Err(Error::TooFewSamples { need: 1, got: 0 });
        }
        // column 0 is the intercept
        let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data.row(i)[j - 1] });
        let y = DVector::from_column_slice(data.labels());
        let xtx = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        let (beta, ridged) = match xtx.clone().cholesky() {
            Some(c) => (c.solve(&xty), false),
            None if config.ridge_fallback => {
                let scale = (xtx.trace() / (d + 1) as f64).max(f64::MIN_POSITIVE);
                let mut reg = xtx;
                for k in 0..=d {
                    reg[(k, k)] += config.ridge * scale;
                }
                let c = reg.cholesky().ok_or(Error::Singular)?;
                (c.solve(&xty), true)
            }
            None => return Err(Error::Singular),
        };
        Ok(LinearModel {
            intercept: beta[0],
            coef: beta.iter().skip(1).copied().collect(),
            ridged,
        })
    }

    pub fn n_features(&self) -> usize {
        self.coef.len()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_matrix(features, self.coef.len())?;
        Ok(features
            .chunks(self.coef.len())
            .map(|x| self.intercept + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_on_linear_data() {
        let x: Vec<f64> = (0..30).map(|i| ((i * 7919) % 31) as f64 / 31.0).collect();
        let y: Vec<f64> = x.chunks(3).map(|r| 0.5 + 0.2 * r[0] - 0.1 * r[1] + 0.05 * r[2]).collect();
        let ts = TrainingSet::originals(x.clone(), 3, y.clone()).unwrap();
        let m = LinearModel::fit(&ts, &LinearConfig::default()).unwrap();
        assert!(!m.ridged);
        for (p, t) in m.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_system() {
        // duplicated column
        let x = vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        let ts = TrainingSet::originals(x, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let strict = LinearConfig {
            ridge_fallback: false,
            ..Default::default()
        };
        assert!(matches!(LinearModel::fit(&ts, &strict), Err(Error::Singular)));
        let m = LinearModel::fit(&ts, &LinearConfig::default()).unwrap();
        assert!(m.ridged);
        let p = m.predict(&[5.0, 5.0]).unwrap()[0];
        assert!((p - 0.5).abs() < 1e-4);
    }
}
