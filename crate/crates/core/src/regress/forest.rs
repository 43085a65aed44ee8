//! Random forest regression (CART trees on bootstrap samples).
//!
//! Each tree minimises squared error greedily: at every node the split with
//! the largest reduction in sum of squared deviations wins. Candidate
//! thresholds are the midpoints between consecutive distinct feature values
//! present in the node. Ties go to the lower feature index, then the lower
//! threshold.
//!
//! Determinism: rows are put into a canonical order (lexicographic on the
//! feature values, then label) before sampling, and tree `t` draws from
//! sub-seed `(seed, "forest-tree", t)`. The same data in any row order with
//! the same seed gives the same forest, independent of thread count.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_matrix, stable_mean, TrainingSet};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
        }
    }
}

pub(crate) const LEAF: i32 = -1;

/// One regression tree stored as parallel node arrays. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Split feature, or -1 for a leaf.
    pub(crate) feature: Vec<i32>,
    pub(crate) threshold: Vec<f64>,
    pub(crate) left: Vec<u32>,
    pub(crate) right: Vec<u32>,
    /// Mean training label for leaves, 0 for internal nodes.
    pub(crate) value: Vec<f64>,
}

impl Tree {
    pub(crate) fn from_arrays(
        feature: Vec<i32>,
        threshold: Vec<f64>,
        left: Vec<u32>,
        right: Vec<u32>,
        value: Vec<f64>,
        n_features: usize,
    ) -> Result<Self> {
        let n = feature.len();
        if n == 0 || [threshold.len(), left.len(), right.len(), value.len()].iter().any(|&l| l != n) {
            return Err(Error::Config("tree arrays have inconsistent lengths".into()));
        }
        for i in 0..n {
            if feature[i] != LEAF {
                let ok = feature[i] >= 0
                    && (feature[i] as usize) < n_features
                    && (left[i] as usize) < n
                    && (right[i] as usize) < n
                    && left[i] as usize > i
                    && right[i] as usize > i;
                if !ok {
                    return Err(Error::Config(format!("tree node {i} is malformed")));
                }
            }
        }
        Ok(Tree {
            feature,
            threshold,
            left,
            right,
            value,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f == LEAF).count()
    }

    /// Index of the leaf reached by `x`.
    pub fn apply(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while self.feature[i] != LEAF {
            let f = self.feature[i] as usize;
            i = if x[f] <= self.threshold[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        i
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.value[self.apply(x)]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    pub fn value(&self, node: usize) -> f64 {
        self.value[node]
    }

    /// `(feature, threshold)` of an internal node.
    pub fn split(&self, node: usize) -> Option<(usize, f64)> {
        (!self.is_leaf(node)).then(|| (self.feature[node] as usize, self.threshold[node]))
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub(crate) n_features: usize,
    pub(crate) config: ForestConfig,
    pub(crate) seed: u64,
    pub(crate) trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Each tree's prediction for one row.
    pub fn predict_per_tree(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict_row(x)).collect())
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        stable_mean(self.trees.iter().map(|t| t.predict_row(x)))
    }

    /// Mean of the tree predictions for every row of a row-major matrix.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_matrix(features, self.n_features)?;
        Ok(features.par_chunks(self.n_features).map(|x| self.predict_row(x)).collect())
    }
}

/// Training data in canonical row order with per-feature bin codes.
struct Binned {
    n_rows: usize,
    // codes[f * n_rows + r]
    codes: Vec<u32>,
    uniq: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn bin(data: &TrainingSet) -> Binned {
    let n = data.len();
    let d = data.n_features();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (data.row(a), data.row(b));
        ra.iter()
            .zip(rb)
            .map(|(x, y)| (x + 0.0).total_cmp(&(y + 0.0)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(data.labels()[a].total_cmp(&data.labels()[b]))
    });
    let labels = order.iter().map(|&i| data.labels()[i]).collect();
    let mut codes = vec![0u32; d * n];
    let mut uniq = Vec::with_capacity(d);
    let mut col = Vec::with_capacity(n);
    for f in 0..d {
        col.clear();
        col.extend(order.iter().map(|&i| data.row(i)[f] + 0.0));
        let mut u = col.clone();
        u.sort_by(f64::total_cmp);
        u.dedup();
        for (r, v) in col.iter().enumerate() {
            codes[f * n + r] = u.binary_search_by(|p| p.total_cmp(v)).unwrap() as u32;
        }
        uniq.push(u);
    }
    Binned {
        n_rows: n,
        codes,
        uniq,
        labels,
    }
}

/// Midpoint of two consecutive observed values, kept strictly below `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Trains a forest on `data`.
pub fn fit_forest(data: &TrainingSet, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    let n = data.len();
    let d = data.n_features();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if config.min_samples_split < 2 {
        return Err(Error::Config("min_samples_split must be at least 2".into()));
    }
    let max_features = config.max_features.unwrap_or(d);
    if max_features == 0 || max_features > d {
        return Err(Error::Config(format!("max_features must lie in 1..={d}, got {max_features}")));
    }
    let binned = bin(data);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow(&binned, config, max_features, seed, t as u64))
        .collect();
    Ok(ForestModel {
        n_features: d,
        config: config.clone(),
        seed,
        trees,
    })
}

struct Best {
    gain: f64,
    feature: usize,
    lo: u32,
    hi: u32,
}

fn grow(b: &Binned, config: &ForestConfig, max_features: usize, seed: u64, t: u64) -> Tree {
    let n = b.n_rows;
    let d = b.uniq.len();
    let mut rng = seed::rng(seed, "forest-tree", t);
    let mut samples: Vec<u32> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n) as u32).collect()
    } else {
        (0..n as u32).collect()
    };
    let max_bins = b.uniq.iter().map(Vec::len).max().unwrap_or(0);
    let mut cnt = vec![0u32; max_bins];
    let mut sum = vec![0.0f64; max_bins];
    let mut pairs: Vec<(u32, f64)> = Vec::new();
    let mut all_features: Vec<usize> = (0..d).collect();

    let mut tree = Tree {
        feature: vec![LEAF],
        threshold: vec![0.0],
        left: vec![0],
        right: vec![0],
        value: vec![0.0],
    };
    // (node, start, end, depth)
    let mut stack = vec![(0usize, 0usize, n, 0usize)];
    while let Some((node, start, end, depth)) = stack.pop() {
        let rows = &mut samples[start..end];
        let m = rows.len();
        let y0 = b.labels[rows[0] as usize];
        let pure = rows.iter().all(|&r| b.labels[r as usize] == y0);
        let mean = stable_mean(rows.iter().map(|&r| b.labels[r as usize]));
        tree.value[node] = mean;
        if pure || m < config.min_samples_split || config.max_depth.is_some_and(|md| depth >= md) {
            continue;
        }
        let candidates: &[usize] = if max_features < d {
            all_features = index::sample(&mut rng, d, max_features).into_vec();
            all_features.sort_unstable();
            &all_features
        } else {
            &all_features
        };

        let total: f64 = rows.iter().map(|&r| b.labels[r as usize] - mean).sum();
        let base = total * total / m as f64;
        let mut best: Option<Best> = None;
        for &f in candidates {
            let nb = b.uniq[f].len();
            if nb < 2 {
                continue;
            }
            let col = &b.codes[f * n..(f + 1) * n];
            let mut consider = |lo: u32, hi: u32, n_left: usize, s_left: f64| {
                let n_right = m - n_left;
                let s_right = total - s_left;
                let gain = s_left * s_left / n_left as f64 + s_right * s_right / n_right as f64 - base;
                if best.as_ref().is_none_or(|bb| gain > bb.gain) {
                    best = Some(Best { gain, feature: f, lo, hi });
                }
            };
            if m * 8 < nb {
                pairs.clear();
                pairs.extend(rows.iter().map(|&r| (col[r as usize], b.labels[r as usize] - mean)));
                pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
                let (mut n_left, mut s_left) = (0usize, 0.0f64);
                for k in 0..pairs.len() {
                    n_left += 1;
                    s_left += pairs[k].1;
                    if k + 1 < pairs.len() && pairs[k + 1].0 != pairs[k].0 {
                        consider(pairs[k].0, pairs[k + 1].0, n_left, s_left);
                    }
                }
            } else {
                cnt[..nb].fill(0);
                sum[..nb].fill(0.0);
                for &r in rows.iter() {
                    let c = col[r as usize] as usize;
                    cnt[c] += 1;
                    sum[c] += b.labels[r as usize] - mean;
                }
                let (mut n_left, mut s_left) = (0usize, 0.0f64);
                let mut prev: Option<u32> = None;
                for c in 0..nb {
                    if cnt[c] == 0 {
                        continue;
                    }
                    if let Some(p) = prev {
                        consider(p, c as u32, n_left, s_left);
                    }
                    n_left += cnt[c] as usize;
                    s_left += sum[c];
                    prev = Some(c as u32);
                }
            }
        }
        let Some(best) = best else {
            continue;
        };
        let col = &b.codes[best.feature * n..(best.feature + 1) * n];
        // partition: codes <= lo go left
        let mut split = 0;
        for k in 0..m {
            if col[rows[k] as usize] <= best.lo {
                rows.swap(k, split);
                split += 1;
            }
        }
        let u = &b.uniq[best.feature];
        let left = tree.feature.len();
        for _ in 0..2 {
            tree.feature.push(LEAF);
            tree.threshold.push(0.0);
            tree.left.push(0);
            tree.right.push(0);
            tree.value.push(0.0);
        }
        tree.feature[node] = best.feature as i32;
        tree.threshold[node] = midpoint(u[best.lo as usize], u[best.hi as usize]);
        tree.left[node] = left as u32;
        tree.right[node] = left as u32 + 1;
        tree.value[node] = 0.0;
        stack.push((left + 1, start + split, end, depth + 1));
        stack.push((left, start, start + split, depth + 1));
    }
    tree
}
