use serde::{Deserialize, Serialize};

use crate::classify::ClassList;
use crate::error::{Error, Result};
use crate::priors::ClassPriors;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_list: ClassList,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(class_list: ClassList) -> Self {
        let k = class_list.len();
        ConfusionMatrix { class_list, counts: vec![vec![0; k]; k] }
    }

    pub fn from_counts(class_list: ClassList, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = class_list.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: counts.len() });
        }
        Ok(ConfusionMatrix { class_list, counts })
    }

    /// Tallies label indices.
    pub fn from_indices(class_list: ClassList, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch(truth.len(), predicted.len()));
        }
        let mut cm = ConfusionMatrix::zeros(class_list);
        let k = cm.class_list.len();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::UnknownLabel(format!("class index {}", t.max(p))));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn class_list(&self) -> &ClassList {
        &self.class_list
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.class_list != self.class_list {
            return Err(Error::ClassMismatch("confusion matrices use different classes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

/// Tallies class-name labels.
pub fn confusion<S: AsRef<str>>(truth: &[S], predicted: &[S], class_list: &ClassList) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    let index = |s: &S| {
        class_list
            .index_of(s.as_ref())
            .ok_or_else(|| Error::UnknownLabel(s.as_ref().to_string()))
    };
    let t = truth.iter().map(index).collect::<Result<Vec<_>>>()?;
    let p = predicted.iter().map(index).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_indices(class_list.clone(), &t, &p)
}

/// Accuracy summary of a confusion matrix. `None` marks a 0/0 ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub overall_accuracy: f64,
    /// Recall per class.
    pub producers_accuracy: Vec<Option<f64>>,
    /// Precision per class.
    pub users_accuracy: Vec<Option<f64>>,
    pub f1: Vec<Option<f64>>,
    /// Mean F1 with undefined entries counted as 0.
    pub macro_f1: f64,
    /// Classes absent from both truth and predictions.
    pub undefined_f1: Vec<String>,
    pub total: u64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let k = cm.class_list.len();
    let c = &cm.counts;
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let mut producers = Vec::with_capacity(k);
    let mut users = Vec::with_capacity(k);
    let mut f1 = Vec::with_capacity(k);
    let mut undefined = Vec::new();
    for i in 0..k {
        let tp = c[i][i];
        let row: u64 = c[i].iter().sum();
        let col: u64 = c.iter().map(|r| r[i]).sum();
        producers.push(ratio(tp, row));
        users.push(ratio(tp, col));
        // 2TP / (2TP + FP + FN) equals 2PU / (P + U) whenever both are defined
        let f = ratio(2 * tp, row + col);
        if f.is_none() {
            undefined.push(cm.class_list.name(i).to_string());
        }
        f1.push(f);
    }
    let macro_f1 = f1.iter().map(|f| f.unwrap_or(0.0)).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        classes: cm.class_list.names().to_vec(),
        overall_accuracy: cm.trace() as f64 / total as f64,
        producers_accuracy: producers,
        users_accuracy: users,
        f1,
        macro_f1,
        undefined_f1: undefined,
        total,
    })
}

/// `−Σ π ln π` in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(priors: &ClassPriors) -> f64 {
    entropy_of(priors.proportions())
}

pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}
