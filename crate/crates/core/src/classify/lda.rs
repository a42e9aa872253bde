//! Linear discriminant analysis: a Gaussian mixture with one pooled covariance.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassList, Dataset, PosteriorVector};
use crate::error::{Error, Result};

/// Ridge added to the pooled covariance, relative to its mean diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    class_list: ClassList,
    class_means: Vec<Vec<f64>>,
    covariance: DMatrix<f64>,
    /// Lower Cholesky factor of `covariance`.
    chol_lower: DMatrix<f64>,
    train_priors: Vec<f64>,
}

impl LdaModel {
    pub fn fit(data: &Dataset, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::InvalidParams(format!("ridge must be nonnegative, got {ridge}")));
        }
        let k = data.n_classes();
        let d = data.dim();
        let n = data.len();
        let counts = data.class_counts();
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(data.class_list().name(empty).to_string()));
        }
        if n <= k {
            return Err(Error::InsufficientData(format!(
                "{n} samples cannot estimate a pooled covariance over {k} classes"
            )));
        }

        let mut means = vec![vec![0.0; d]; k];
        for (row, &l) in data.rows().iter().zip(data.labels()) {
            for (m, v) in means[l].iter_mut().zip(row) {
                *m += v;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }

        let mut scatter = DMatrix::<f64>::zeros(d, d);
        for (row, &l) in data.rows().iter().zip(data.labels()) {
            let diff = DVector::from_iterator(d, row.iter().zip(&means[l]).map(|(x, m)| x - m));
            scatter.ger(1.0, &diff, &diff, 1.0);
        }
        let mut covariance = scatter / (n - k) as f64;
        let mean_diag = covariance.diagonal().mean();
        for i in 0..d {
            covariance[(i, i)] += ridge * mean_diag;
        }

        let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
        LdaModel::from_parameters(data.class_list().clone(), means, covariance, priors)
    }

    /// Builds a model from given population parameters instead of data.
    pub fn from_parameters(
        class_list: ClassList,
        class_means: Vec<Vec<f64>>,
        covariance: DMatrix<f64>,
        train_priors: Vec<f64>,
    ) -> Result<Self> {
        let k = class_list.len();
        if class_means.len() != k || train_priors.len() != k {
            return Err(Error::ClassMismatch("parameter count differs from class list".into()));
        }
        let d = covariance.nrows();
        if covariance.ncols() != d {
            return Err(Error::InvalidParams("covariance is not square".into()));
        }
        if let Some(m) = class_means.iter().find(|m| m.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: m.len() });
        }
        if let Some(i) = train_priors.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::ZeroTrainPrior(class_list.name(i).to_string()));
        }
        let chol = Cholesky::new(covariance.clone()).ok_or(Error::SingularCovariance)?;
        Ok(LdaModel {
            class_list,
            class_means,
            covariance,
            chol_lower: chol.l(),
            train_priors,
        })
    }

    pub fn class_list(&self) -> &ClassList {
        &self.class_list
    }

    pub fn class_means(&self) -> &[Vec<f64>] {
        &self.class_means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn train_priors(&self) -> &[f64] {
        &self.train_priors
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// Squared Mahalanobis distance from `x` to the mean of class `k`.
    pub fn mahalanobis_sq(&self, x: &[f64], k: usize) -> f64 {
        let d = self.dim();
        let diff = DVector::from_iterator(d, x.iter().zip(&self.class_means[k]).map(|(a, b)| a - b));
        let z = self
            .chol_lower
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    pub fn posteriors(&self, x: &[f64]) -> Result<PosteriorVector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let log_scores: Vec<f64> = (0..self.class_list.len())
            .map(|k| self.train_priors[k].ln() - 0.5 * self.mahalanobis_sq(x, k))
            .collect();
        Ok(PosteriorVector(softmax(&log_scores)))
    }
}

/// Normalized exponentials, shifted by the maximum for stability.
pub fn softmax(log_scores: &[f64]) -> Vec<f64> {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}
