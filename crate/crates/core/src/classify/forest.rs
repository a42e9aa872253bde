//! Random forest of CART trees with Gini splits on bootstrap samples.
//!
//! Tree `i` draws all of its randomness from a ChaCha8 stream keyed by
//! `(seed, i)`, so the fitted forest does not depend on how trees are
//! scheduled across threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassList, Dataset, PosteriorVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features examined per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self, d: usize) -> Result<usize> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParams("n_trees must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParams("min_leaf must be positive".into()));
        }
        let mtry = self
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
        if mtry == 0 || mtry > d {
            return Err(Error::InvalidParams(format!(
                "features_per_split must lie in 1..={d}, got {mtry}"
            )));
        }
        Ok(mtry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

/// Arena-allocated tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class at the leaf reached by `x` (lowest index on ties).
    pub fn vote(&self, x: &[f64]) -> usize {
        let counts = self.leaf_counts(x);
        let mut best = 0;
        for (k, &c) in counts.iter().enumerate().skip(1) {
            if c > counts[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    class_list: ClassList,
    params: ForestParams,
    dim: usize,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn fit(data: &Dataset, params: &ForestParams) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InvalidParams("random forest needs at least 2 samples".into()));
        }
        let mtry = params.validate(data.dim())?;
        let grow = |t: usize| {
            let mut rng = tree_rng(params.seed, t);
            TreeBuilder::new(data, mtry, params).grow(&mut rng)
        };

        #[cfg(feature = "parallel")]
        let trees = {
            use rayon::prelude::*;
            (0..params.n_trees).into_par_iter().map(grow).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trees = (0..params.n_trees).map(grow).collect();

        Ok(ForestModel {
            class_list: data.class_list().clone(),
            params: params.clone(),
            dim: data.dim(),
            trees,
        })
    }

    pub fn class_list(&self) -> &ClassList {
        &self.class_list
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Fraction of trees voting for each class.
    pub fn posteriors(&self, x: &[f64]) -> Result<PosteriorVector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut votes = vec![0usize; self.class_list.len()];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        let n = self.trees.len() as f64;
        Ok(PosteriorVector(votes.into_iter().map(|v| v as f64 / n).collect()))
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// Weighted child impurity; smaller is better.
    score: f64,
    split_at: usize,
}

impl<'a> TreeBuilder<'a> {
    fn new(data: &'a Dataset, mtry: usize, params: &ForestParams) -> Self {
        TreeBuilder {
            data,
            mtry,
            min_leaf: params.min_leaf,
            max_depth: params.max_depth,
            nodes: Vec::new(),
        }
    }

    fn grow(mut self, rng: &mut ChaCha8Rng) -> Tree {
        let n = self.data.len();
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        self.build(sample, 0, rng);
        Tree { nodes: self.nodes }
    }

    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.data.n_classes()];
        for &i in idx {
            counts[self.data.labels()[i]] += 1;
        }
        counts
    }

    fn build(&mut self, mut idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || idx.len() < 2 * self.min_leaf {
            return node_id;
        }

        let Some(best) = self.best_split(&mut idx, &counts, rng) else {
            return node_id;
        };
        let rows = self.data.rows();
        idx.sort_by(|&a, &b| {
            rows[a][best.feature]
                .total_cmp(&rows[b][best.feature])
                .then(a.cmp(&b))
        });
        let right_idx = idx.split_off(best.split_at);
        let left = self.build(idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[node_id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        node_id
    }

    /// Examines `mtry` random features, continuing through the rest only if none
    /// of those admits a valid split.
    fn best_split(&self, idx: &mut [usize], counts: &[u32], rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let d = self.data.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(c) = self.best_split_on(idx, counts, f) {
                if best.as_ref().is_none_or(|b| c.score < b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_split_on(&self, idx: &mut [usize], counts: &[u32], feature: usize) -> Option<Candidate> {
        let rows = self.data.rows();
        let labels = self.data.labels();
        idx.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));

        let n = idx.len();
        let mut left = vec![0u32; counts.len()];
        let mut right = counts.to_vec();
        let mut best: Option<Candidate> = None;
        for pos in 1..n {
            let moved = labels[idx[pos - 1]];
            left[moved] += 1;
            right[moved] -= 1;
            let lo = rows[idx[pos - 1]][feature];
            let hi = rows[idx[pos]][feature];
            if lo == hi || pos < self.min_leaf || n - pos < self.min_leaf {
                continue;
            }
            let score = pos as f64 * gini(&left, pos) + (n - pos) as f64 * gini(&right, n - pos);
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = 0.5 * (lo + hi);
                // midpoint can round up to `hi` for adjacent floats
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate { feature, threshold, score, split_at: pos });
            }
        }
        best
    }
}

fn gini(counts: &[u32], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> Dataset {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let k = i % 2;
            let c = if k == 0 { -3.0 } else { 3.0 };
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![c + x, c + y]);
            labels.push(k);
        }
        Dataset::from_rows(ClassList::new(["a", "b"]).unwrap(), rows, labels, "r").unwrap()
    }

    #[test]
    fn pure_data_gives_single_leaf() {
        let cl = ClassList::new(["a", "b"]).unwrap();
        let d = Dataset::from_rows(cl, vec![vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 1], "r").unwrap();
        let params = ForestParams { n_trees: 1, ..Default::default() };
        let m = ForestModel::fit(&d, &params).unwrap();
        assert_eq!(m.trees()[0].nodes().len(), 1);
        assert_eq!(m.posteriors(&[0.0]).unwrap().0, vec![0.0, 1.0]);
    }

    #[test]
    fn same_seed_same_forest() {
        let d = blobs(200, 1);
        let p = ForestParams { n_trees: 20, seed: 7, ..Default::default() };
        assert_eq!(ForestModel::fit(&d, &p).unwrap(), ForestModel::fit(&d, &p).unwrap());
        let other = ForestModel::fit(&d, &ForestParams { seed: 8, ..p }).unwrap();
        assert_ne!(other, ForestModel::fit(&d, &ForestParams { n_trees: 20, seed: 7, ..Default::default() }).unwrap());
    }

    #[test]
    fn separated_blobs_fit_well() {
        let d = blobs(400, 3);
        // nearest class mean oracle
        let oracle_correct = d
            .rows()
            .iter()
            .zip(d.labels())
            .filter(|(r, &l)| ((r[0] + r[1]) > 0.0) as usize == l)
            .count();
        let m = ForestModel::fit(&d, &ForestParams { seed: 42, ..Default::default() }).unwrap();
        let correct = d
            .rows()
            .iter()
            .zip(d.labels())
            .filter(|(r, &l)| m.posteriors(r).unwrap().argmax() == l)
            .count();
        let acc = correct as f64 / d.len() as f64;
        assert!(acc >= 0.99, "accuracy {acc}");
        assert!(correct >= oracle_correct.min(d.len() * 99 / 100));
    }

    #[test]
    fn posteriors_are_vote_fractions() {
        let d = blobs(100, 5);
        let m = ForestModel::fit(&d, &ForestParams { n_trees: 7, seed: 1, ..Default::default() }).unwrap();
        for x in [[0.0, 0.0], [3.0, 3.0], [-1.0, 0.5]] {
            let p = m.posteriors(&x).unwrap();
            assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for v in &p.0 {
                let scaled = v * 7.0;
                assert!((scaled - scaled.round()).abs() < 1e-9);
            }
            let votes: usize = m.trees().iter().filter(|t| t.vote(&x) == p.argmax()).count();
            assert_eq!(votes as f64 / 7.0, p.0[p.argmax()]);
        }
    }

    #[test]
    fn invalid_params() {
        let d = blobs(10, 0);
        assert!(ForestModel::fit(&d, &ForestParams { n_trees: 0, ..Default::default() }).is_err());
        assert!(ForestModel::fit(&d, &ForestParams { features_per_split: Some(3), ..Default::default() }).is_err());
        assert!(ForestModel::fit(&d, &ForestParams { min_leaf: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn depth_limit() {
        let d = blobs(100, 9);
        let m = ForestModel::fit(&d, &ForestParams { n_trees: 3, max_depth: Some(0), ..Default::default() }).unwrap();
        assert!(m.trees().iter().all(|t| t.nodes().len() == 1));
    }
}
