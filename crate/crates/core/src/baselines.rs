//! Comparison methods: SMOTE rebalancing, per-region z-transformation, the
//! pipelines built from them, and the guess-the-major-class baseline.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{argmax, ClassList, ClassifierConfig, Dataset};
use crate::error::{Error, Result};
use crate::priors::ClassPriors;
use crate::shift::psa_reweight;

/// Neighbor count used by SMOTE unless configured otherwise.
pub const DEFAULT_SMOTE_K: usize = 5;

/// Per-class target sizes for a rebalanced training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    pub target_counts: Vec<usize>,
    pub k: usize,
}

impl ResamplePlan {
    /// Largest-remainder apportionment of `total` over `priors` (ties to the lowest index).
    pub fn new(priors: &[f64], total: usize, k: usize) -> Self {
        let quotas: Vec<f64> = priors
            .iter()
            .map(|p| {
                let q = p * total as f64;
                // absorb rounding noise so exact quotas stay exact
                if (q - q.round()).abs() < 1e-9 { q.round() } else { q }
            })
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..priors.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(total.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        ResamplePlan { target_counts: counts, k }
    }
}

/// Where a resampled row came from.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleOrigin {
    Original(usize),
    /// `base + u · (neighbor − base)`.
    Synthetic { base: usize, neighbor: usize, u: f64 },
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub data: Dataset,
    pub origins: Vec<SampleOrigin>,
}

/// Rebalances `train` to `target_priors` at constant total size.
pub fn smote_resample(train: &Dataset, target_priors: &ClassPriors, k: usize, seed: u64) -> Result<Dataset> {
    Ok(smote_resample_traced(train, target_priors, k, seed)?.data)
}

/// [`smote_resample`], also reporting the provenance of each output row.
///
/// Classes above target are undersampled without replacement (survivors keep
/// input order); classes below target keep every member and gain SMOTE
/// points interpolated toward one of their `k` nearest same-class neighbors.
pub fn smote_resample_traced(train: &Dataset, target_priors: &ClassPriors, k: usize, seed: u64) -> Result<Resampled> {
    if k == 0 {
        return Err(Error::InvalidParams("SMOTE k must be positive".into()));
    }
    let cl = train.class_list();
    let target = target_priors.aligned(cl)?;
    let counts = train.class_counts();
    for (c, (&n, &p)) in counts.iter().zip(&target).enumerate() {
        if p > 0.0 && n < k + 1 {
            return Err(Error::SmoteInfeasible {
                class: cl.name(c).to_string(),
                available: n,
                required: k + 1,
            });
        }
    }
    let plan = ResamplePlan::new(&target, train.len(), k);
    let origins: Vec<SampleOrigin> = if plan.target_counts == counts {
        (0..train.len()).map(SampleOrigin::Original).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members: Vec<Vec<usize>> = (0..cl.len())
            .map(|c| (0..train.len()).filter(|&i| train.labels()[i] == c).collect())
            .collect();
        let mut kept = Vec::new();
        let mut synthetic = Vec::new();
        for c in 0..cl.len() {
            let m = &members[c];
            let want = plan.target_counts[c];
            if want <= m.len() {
                let mut pick: Vec<usize> = sample(&mut rng, m.len(), want).into_iter().map(|j| m[j]).collect();
                pick.sort_unstable();
                kept.extend(pick);
            } else {
                kept.extend(m.iter().copied());
                let neighbors = nearest_neighbors(train, m, k);
                for _ in 0..want - m.len() {
                    let j = rng.random_range(0..m.len());
                    let nb = neighbors[j][rng.random_range(0..k)];
                    let u: f64 = rng.random();
                    synthetic.push(SampleOrigin::Synthetic { base: m[j], neighbor: nb, u });
                }
            }
        }
        kept.sort_unstable();
        kept.into_iter().map(SampleOrigin::Original).chain(synthetic).collect()
    };

    let mut ids = Vec::with_capacity(origins.len());
    let mut rows = Vec::with_capacity(origins.len());
    let mut labels = Vec::with_capacity(origins.len());
    let mut regions = Vec::with_capacity(origins.len());
    let mut groups = train.group_ids().map(|_| Vec::with_capacity(origins.len()));
    let mut n_synth = 0;
    for o in &origins {
        let src = match *o {
            SampleOrigin::Original(i) => {
                ids.push(train.ids()[i].clone());
                rows.push(train.row(i).to_vec());
                i
            }
            SampleOrigin::Synthetic { base, neighbor, u } => {
                ids.push(format!("smote-{n_synth}"));
                n_synth += 1;
                let (x, xn) = (train.row(base), train.row(neighbor));
                rows.push(x.iter().zip(xn).map(|(a, b)| a + u * (b - a)).collect());
                base
            }
        };
        labels.push(train.labels()[src]);
        regions.push(train.regions()[src].clone());
        if let (Some(g), Some(src_g)) = (groups.as_mut(), train.group_ids()) {
            g.push(src_g[src].clone());
        }
    }
    let data = Dataset::new(cl.clone(), ids, rows, labels, regions, groups)?;
    Ok(Resampled { data, origins })
}

/// For each member, its `k` nearest other members (Euclidean, ties by index).
fn nearest_neighbors(data: &Dataset, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    members
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let dist: f64 = data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Per-feature standardization fitted on one region (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTransform {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features with (numerically) zero variance; these map to 0.
    pub degenerate: Vec<bool>,
}

impl ZTransform {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InsufficientData("z-transform needs at least 2 rows".into()));
        }
        let mean = data.feature_mean();
        let n = data.len() as f64;
        let mut var = vec![0.0; data.dim()];
        for r in data.rows() {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let degenerate = std
            .iter()
            .zip(&mean)
            .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
            .collect();
        Ok(ZTransform { mean, std, degenerate })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: x.len() });
        }
        Ok((0..x.len())
            .map(|j| if self.degenerate[j] { 0.0 } else { (x[j] - self.mean[j]) / self.std[j] })
            .collect())
    }

    /// Inverse of [`apply`](Self::apply) on non-degenerate features; degenerate ones return the mean.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: z.len() });
        }
        Ok((0..z.len())
            .map(|j| if self.degenerate[j] { self.mean[j] } else { z[j] * self.std[j] + self.mean[j] })
            .collect())
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let rows = data.rows().iter().map(|r| self.apply(r)).collect::<Result<Vec<_>>>()?;
        data.with_rows(rows)
    }
}

/// The most prevalent class under `priors` (lowest index on ties).
pub fn major_class_classify(priors: &ClassPriors, class_list: &ClassList) -> Result<usize> {
    Ok(argmax(&priors.aligned(class_list)?))
}

/// SMOTE-rebalance the training set to the target priors, fit, and predict by plain argmax.
pub fn pipeline_smote_psa(
    train: &Dataset,
    test: &Dataset,
    test_priors: &ClassPriors,
    config: &ClassifierConfig,
    smote_k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let rebalanced = smote_resample(train, test_priors, smote_k, seed)?;
    let model = config.fit(&rebalanced)?;
    test.rows().iter().map(|x| model.predict(x)).collect()
}

/// Standardize each region on its own statistics, fit, and reweight posteriors by the original priors.
pub fn pipeline_zt_fpsa(
    train: &Dataset,
    test: &Dataset,
    test_priors: &ClassPriors,
    config: &ClassifierConfig,
) -> Result<Vec<usize>> {
    let train_priors = ClassPriors::empirical(train.regions()[0].clone(), train);
    let z_train = ZTransform::fit(train)?.apply_dataset(train)?;
    let z_test = ZTransform::fit(test)?;
    let model = config.fit(&z_train)?;
    test.rows()
        .iter()
        .map(|x| {
            let p = model.posteriors(&z_test.apply(x)?)?;
            Ok(psa_reweight(&p, model.class_list(), &train_priors, test_priors)?.argmax())
        })
        .collect()
}

/// SMOTE-rebalance, then standardize each side on its own statistics, fit, and predict by plain argmax.
pub fn pipeline_zt_smote_fpsa(
    train: &Dataset,
    test: &Dataset,
    test_priors: &ClassPriors,
    config: &ClassifierConfig,
    smote_k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let rebalanced = smote_resample(train, test_priors, smote_k, seed)?;
    let z_train = ZTransform::fit(&rebalanced)?.apply_dataset(&rebalanced)?;
    let z_test = ZTransform::fit(test)?;
    let model = config.fit(&z_train)?;
    test.rows()
        .iter()
        .map(|x| model.predict(&z_test.apply(x)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cl2() -> ClassList {
        ClassList::new(["A", "B"]).unwrap()
    }

    fn imbalanced(na: usize, nb: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..na {
            rows.push(vec![i as f64, (i * 7 % 13) as f64]);
            labels.push(0);
        }
        for i in 0..nb {
            rows.push(vec![100.0 + i as f64, (i * 3 % 5) as f64 - 50.0]);
            labels.push(1);
        }
        Dataset::from_rows(cl2(), rows, labels, "train").unwrap()
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(ResamplePlan::new(&[0.5, 0.5], 110, 5).target_counts, vec![55, 55]);
        assert_eq!(ResamplePlan::new(&[1.0 / 3.0; 3], 10, 5).target_counts, vec![4, 3, 3]);
        assert_eq!(ResamplePlan::new(&[0.25, 0.75], 10, 5).target_counts, vec![3, 7]);
        assert_eq!(ResamplePlan::new(&[0.0, 1.0], 7, 5).target_counts, vec![0, 7]);
    }

    #[test]
    fn hundred_ten_to_even() {
        let d = imbalanced(100, 10);
        let target = ClassPriors::new("t", [("A", 0.5), ("B", 0.5)]).unwrap();
        let out = smote_resample_traced(&d, &target, 5, 1).unwrap();
        assert_eq!(out.data.class_counts(), vec![55, 55]);
        for (o, row) in out.origins.iter().zip(out.data.rows()) {
            match *o {
                SampleOrigin::Original(i) => assert_eq!(row, d.row(i)),
                SampleOrigin::Synthetic { base, neighbor, u } => {
                    assert!((0.0..=1.0).contains(&u));
                    assert_eq!(d.labels()[base], d.labels()[neighbor]);
                    for j in 0..2 {
                        let (a, b) = (d.row(base)[j], d.row(neighbor)[j]);
                        assert!((row[j] - (a + u * (b - a))).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_target_is_identity() {
        let d = imbalanced(30, 10);
        let target = ClassPriors::empirical("t", &d);
        let out = smote_resample(&d, &target, 5, 9).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn too_small_class() {
        let d = imbalanced(20, 3);
        let target = ClassPriors::new("t", [("A", 0.5), ("B", 0.5)]).unwrap();
        assert_eq!(
            smote_resample(&d, &target, 5, 0).unwrap_err(),
            Error::SmoteInfeasible { class: "B".into(), available: 3, required: 6 }
        );
        // k = 2 works for the same class
        assert!(smote_resample(&d, &target, 2, 0).is_ok());
    }

    #[test]
    fn neighbor_ties_by_index() {
        let cl = ClassList::new(["A"]).unwrap();
        let d = Dataset::from_rows(cl, vec![vec![0.0], vec![1.0], vec![-1.0], vec![2.0]], vec![0; 4], "r").unwrap();
        let nn = nearest_neighbors(&d, &[0, 1, 2, 3], 2);
        assert_eq!(nn[0], vec![1, 2]);
        assert_eq!(nn[1], vec![0, 3]);
    }

    #[test]
    fn ztransform_basics() {
        let cl = ClassList::new(["A"]).unwrap();
        let d = Dataset::from_rows(cl.clone(), vec![vec![-1.0, 4.0], vec![1.0, 4.0]], vec![0, 0], "r").unwrap();
        let z = ZTransform::fit(&d).unwrap();
        assert_eq!(z.mean, vec![0.0, 4.0]);
        assert_eq!(z.std[0], 1.0);
        assert_eq!(z.degenerate, vec![false, true]);
        assert_eq!(z.apply(&[-1.0, 4.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(z.apply(&[1.0, 4.0]).unwrap(), vec![1.0, 0.0]);

        let one = Dataset::from_rows(cl, vec![vec![1.0]], vec![0], "r").unwrap();
        assert!(matches!(ZTransform::fit(&one), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ztransform_standardizes() {
        let d = imbalanced(40, 15);
        let z = ZTransform::fit(&d).unwrap();
        let t = z.apply_dataset(&d).unwrap();
        let zz = ZTransform::fit(&t).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(zz.mean[j], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(zz.std[j], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn major_class() {
        let cl = ClassList::new(["a", "b", "c"]).unwrap();
        let p = ClassPriors::new("r", [("a", 0.7), ("b", 0.2), ("c", 0.1)]).unwrap();
        assert_eq!(major_class_classify(&p, &cl).unwrap(), 0);
        let u = ClassPriors::new("r", [("a", 1.0 / 3.0), ("b", 1.0 / 3.0), ("c", 1.0 / 3.0)]).unwrap();
        assert_eq!(major_class_classify(&u, &cl).unwrap(), 0);
        let mfp = ClassList::new(["winter wheat", "maize", "MFP"]).unwrap();
        let occ = ClassPriors::new("r", [("winter wheat", 0.2), ("maize", 0.1), ("MFP", 0.7)]).unwrap();
        assert_eq!(mfp.name(major_class_classify(&occ, &mfp).unwrap()), "MFP");
    }
}
