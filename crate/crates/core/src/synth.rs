//! Synthetic regional Gaussian mixtures obeying the additive mean model.
//!
//! Region `r`, class `k` features are drawn from `N(a_r + b_k, Σ)` with one
//! covariance shared across all strata, and labels from the region's class
//! proportions. Because every population parameter is known, the Bayes rule
//! of each region is available as an oracle.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classify::{lda::softmax, ClassList, Dataset, LdaModel, PosteriorVector};
use crate::error::{Error, Result};
use crate::priors::{ClassPriors, PRIOR_SUM_TOLERANCE};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub regions: Vec<String>,
    pub classes: Vec<String>,
    /// Region whose effect is pinned to zero.
    pub train_region: String,
    /// `b`, one row per class.
    pub class_effects: Vec<Vec<f64>>,
    /// `a`, one row per region.
    pub region_effects: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    /// Class proportions, one row per region.
    pub priors: Vec<Vec<f64>>,
    pub samples_per_region: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Three regions, four classes, six features. The training region is
    /// balanced and unshifted. Each target has a skewed class mix and an
    /// offset that moves its dominant class toward a minority class's
    /// training-region position.
    pub fn acceptance_world() -> Self {
        let d: i32 = 6;
        let covariance = (0..d)
            .map(|i| (0..d).map(|j| 0.3f64.powi((i - j).abs())).collect())
            .collect();
        SyntheticSpec {
            regions: vec!["r1".into(), "r2".into(), "r3".into()],
            classes: vec!["wheat".into(), "maize".into(), "sunflower".into(), "meadow".into()],
            train_region: "r1".into(),
            class_effects: vec![
                vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![2.0, 1.0, 0.0, 0.0, 0.5, 0.0],
                vec![0.0, 1.0, 2.0, 1.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 1.0, 2.0, 1.0],
            ],
            region_effects: vec![
                vec![0.0; 6],
                vec![-0.8, -0.4, 0.0, 0.0, -0.2, 0.0],
                vec![-0.2, 0.4, 0.8, 0.0, -0.8, -0.4],
            ],
            covariance,
            priors: vec![
                vec![0.25, 0.25, 0.25, 0.25],
                vec![0.10, 0.65, 0.05, 0.20],
                vec![0.05, 0.10, 0.15, 0.70],
            ],
            samples_per_region: vec![2000, 2000, 2000],
            seed: 42,
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance.len()
    }

    pub fn class_list(&self) -> Result<ClassList> {
        ClassList::new(self.classes.iter().cloned()).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn region_index(&self, region: &str) -> Result<usize> {
        self.regions
            .iter()
            .position(|r| r == region)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown region {region}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let (r, k, d) = (self.regions.len(), self.classes.len(), self.dim());
        if r == 0 || k == 0 || d == 0 {
            return bad("regions, classes and dimension must be nonempty".into());
        }
        self.class_list()?;
        for (i, name) in self.regions.iter().enumerate() {
            if self.regions[..i].contains(name) {
                return bad(format!("duplicate region {name}"));
            }
        }
        if self.class_effects.len() != k || self.class_effects.iter().any(|row| row.len() != d) {
            return bad(format!("class_effects must be {k}x{d}"));
        }
        if self.region_effects.len() != r || self.region_effects.iter().any(|row| row.len() != d) {
            return bad(format!("region_effects must be {r}x{d}"));
        }
        if self.covariance.iter().any(|row| row.len() != d) {
            return bad("covariance must be square".into());
        }
        if self.priors.len() != r || self.priors.iter().any(|row| row.len() != k) {
            return bad(format!("priors must be {r}x{k}"));
        }
        if self.samples_per_region.len() != r {
            return bad(format!("samples_per_region needs {r} entries"));
        }
        let all_finite = self
            .class_effects
            .iter()
            .chain(&self.region_effects)
            .chain(&self.covariance)
            .flatten()
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite parameter".into());
        }
        for (name, row) in self.regions.iter().zip(&self.priors) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
                return bad(format!("priors of region {name} must be nonnegative and sum to 1 (sum {sum})"));
            }
        }
        let t = self.region_index(&self.train_region)?;
        if self.region_effects[t].iter().any(|&v| v != 0.0) {
            return bad("training region effect must be zero".into());
        }
        for i in 0..d {
            for j in 0..i {
                if self.covariance[i][j] != self.covariance[j][i] {
                    return bad("covariance must be symmetric".into());
                }
            }
        }
        self.cholesky()?;
        Ok(())
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }

    fn cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.covariance_matrix())
            .ok_or_else(|| Error::InvalidSpec("covariance is not positive definite".into()))
    }

    /// Population mean `a_r + b_k`.
    pub fn class_mean(&self, region: usize, class: usize) -> Vec<f64> {
        self.region_effects[region]
            .iter()
            .zip(&self.class_effects[class])
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn region_priors(&self, region: usize) -> Result<ClassPriors> {
        ClassPriors::new(
            self.regions[region].clone(),
            self.classes.iter().cloned().zip(self.priors[region].iter().copied()),
        )
    }

    pub fn all_priors(&self) -> Result<BTreeMap<String, ClassPriors>> {
        (0..self.regions.len())
            .map(|r| Ok((self.regions[r].clone(), self.region_priors(r)?)))
            .collect()
    }

    /// Draws every region's labeled sample; region `r` uses ChaCha8 stream `r` of the seed.
    pub fn generate(&self) -> Result<BTreeMap<String, Dataset>> {
        self.validate()?;
        let chol = self.cholesky()?.l();
        let class_list = self.class_list()?;
        let mut out = BTreeMap::new();
        for (r, name) in self.regions.iter().enumerate() {
            let n = self.samples_per_region[r];
            if n == 0 {
                continue;
            }
            let mut rng = stream_rng(self.seed, r as u64);
            let (rows, labels): (Vec<_>, Vec<_>) = (0..n).map(|_| self.draw(r, &chol, &mut rng)).unzip();
            let ids: Vec<String> = (0..n).map(|i| format!("{name}-{i:06}")).collect();
            let data = Dataset::new(class_list.clone(), ids.clone(), rows, labels, vec![name.clone(); n], Some(ids))?;
            out.insert(name.clone(), data);
        }
        Ok(out)
    }

    fn draw(&self, region: usize, chol: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
        let u: f64 = rng.random();
        let p = &self.priors[region];
        let mut acc = 0.0;
        let mut label = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        for (k, &pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc && pk > 0.0 {
                label = k;
                break;
            }
        }
        let d = self.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let noise = chol * z;
        let x = self
            .class_mean(region, label)
            .iter()
            .zip(noise.iter())
            .map(|(m, e)| m + e)
            .collect();
        (x, label)
    }

    /// LDA model carrying the exact population parameters of one region.
    ///
    /// Classes with zero prior in the region get a vanishing prior so the
    /// model stays defined; they are never the argmax against a positive-prior class
    /// except at astronomically unlikely points.
    pub fn population_lda(&self, region: usize) -> Result<LdaModel> {
        self.validate()?;
        let k = self.classes.len();
        let means = (0..k).map(|c| self.class_mean(region, c)).collect();
        let priors = self.priors[region].iter().map(|&p| if p > 0.0 { p } else { f64::MIN_POSITIVE }).collect();
        LdaModel::from_parameters(self.class_list()?, means, self.covariance_matrix(), priors)
    }

    /// Exact posterior `P(Y = k | X = x)` in region `region`.
    pub fn true_posteriors(&self, region: &str, x: &[f64]) -> Result<PosteriorVector> {
        self.validate()?;
        let r = self.region_index(region)?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let chol = self.cholesky()?;
        let scores: Vec<f64> = (0..self.classes.len())
            .map(|k| {
                let p = self.priors[r][k];
                if p == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let diff = DVector::from_iterator(
                    self.dim(),
                    x.iter().zip(self.class_mean(r, k)).map(|(a, m)| a - m),
                );
                let z = chol.l().solve_lower_triangular(&diff).expect("positive diagonal");
                p.ln() - 0.5 * z.norm_squared()
            })
            .collect();
        Ok(PosteriorVector(softmax(&scores)))
    }

    /// Monte Carlo accuracy of the region's Bayes rule, with its binomial standard error.
    pub fn bayes_accuracy(&self, region: &str, n_monte_carlo: usize, seed: u64) -> Result<(f64, f64)> {
        if n_monte_carlo == 0 {
            return Err(Error::InvalidParams("n_monte_carlo must be positive".into()));
        }
        self.validate()?;
        let r = self.region_index(region)?;
        let l = self.cholesky()?.l();
        let mut rng = stream_rng(seed, r as u64);
        let mut correct = 0usize;
        for _ in 0..n_monte_carlo {
            let (x, k) = self.draw(r, &l, &mut rng);
            if self.bayes_label(r, &l, &x) == k {
                correct += 1;
            }
        }
        let n = n_monte_carlo as f64;
        let acc = correct as f64 / n;
        Ok((acc, (acc * (1.0 - acc) / n).sqrt()))
    }

    fn bayes_label(&self, r: usize, l: &DMatrix<f64>, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 0..self.classes.len() {
            let p = self.priors[r][k];
            if p == 0.0 {
                continue;
            }
            let diff = DVector::from_iterator(self.dim(), x.iter().zip(self.class_mean(r, k)).map(|(a, m)| a - m));
            let z = l.solve_lower_triangular(&diff).expect("positive diagonal");
            let s = p.ln() - 0.5 * z.norm_squared();
            if s > best.0 {
                best = (s, k);
            }
        }
        best.1
    }
}
