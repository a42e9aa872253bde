use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, duplicate-free class names. Class indices everywhere refer to this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassList(Vec<String>);

impl ClassList {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidParams("class list is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidParams(format!("duplicate class {n}")));
            }
        }
        Ok(ClassList(names))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn name(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }
}

/// Labeled feature rows, each tagged with its region.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    class_list: ClassList,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    regions: Vec<String>,
    group_ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        class_list: ClassList,
        ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        regions: Vec<String>,
        group_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no rows".into()));
        }
        for len in [ids.len(), labels.len(), regions.len()] {
            if len != n {
                return Err(Error::LengthMismatch(n, len));
            }
        }
        if let Some(g) = &group_ids {
            if g.len() != n {
                return Err(Error::LengthMismatch(n, g.len()));
            }
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InsufficientData("zero feature dimension".into()));
        }
        for r in &rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("non-finite feature value".into()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_list.len()) {
            return Err(Error::UnknownLabel(format!("class index {bad}")));
        }
        Ok(Dataset { class_list, ids, rows, labels, regions, group_ids })
    }

    /// Convenience constructor with generated ids and a single region.
    pub fn from_rows(class_list: ClassList, rows: Vec<Vec<f64>>, labels: Vec<usize>, region: &str) -> Result<Self> {
        let n = rows.len();
        Dataset::new(
            class_list,
            (0..n).map(|i| format!("{region}-{i}")).collect(),
            rows,
            labels,
            vec![region.to_string(); n],
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn class_list(&self) -> &ClassList {
        &self.class_list
    }

    pub fn n_classes(&self) -> usize {
        self.class_list.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn group_ids(&self) -> Option<&[String]> {
        self.group_ids.as_deref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Per-feature arithmetic mean over all rows (labels unused).
    pub fn feature_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for r in &self.rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.class_list.clone(),
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.regions[i].clone()).collect(),
            self.group_ids
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        )
    }

    /// Same metadata, new feature rows.
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<Dataset> {
        Dataset::new(
            self.class_list.clone(),
            self.ids.clone(),
            rows,
            self.labels.clone(),
            self.regions.clone(),
            self.group_ids.clone(),
        )
    }

    /// Splits by region id, ordered by region id.
    pub fn split_by_region(&self) -> Result<BTreeMap<String, Dataset>> {
        let mut idx: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.regions.iter().enumerate() {
            idx.entry(r.clone()).or_default().push(i);
        }
        idx.into_iter()
            .map(|(r, ix)| Ok((r, self.subset(&ix)?)))
            .collect()
    }

    /// Concatenates datasets sharing one class list.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InsufficientData("nothing to concatenate".into()))?;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut regions = Vec::new();
        let all_groups = parts.iter().all(|p| p.group_ids.is_some());
        let mut groups = Vec::new();
        for p in parts {
            if p.class_list != first.class_list {
                return Err(Error::ClassMismatch("datasets disagree on class list".into()));
            }
            ids.extend(p.ids.iter().cloned());
            rows.extend(p.rows.iter().cloned());
            labels.extend(p.labels.iter().copied());
            regions.extend(p.regions.iter().cloned());
            if let Some(g) = &p.group_ids {
                groups.extend(g.iter().cloned());
            }
        }
        Dataset::new(
            first.class_list.clone(),
            ids,
            rows,
            labels,
            regions,
            all_groups.then_some(groups),
        )
    }
}
