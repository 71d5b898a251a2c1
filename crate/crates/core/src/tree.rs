//! CART regression trees and extremely randomized forests.
//!
//! Trees are grown from per-sample `(g, h)` statistics: a node's score is
//! `G^2 / (H + lambda)` and its value `G / (H + lambda)`. Plain CART uses
//! `g = y`, `h = 1` and `lambda = gamma = 0`, for which maximising the gain is
//! exactly minimising the weighted child variance. The boosting module reuses
//! the same grower with gradient statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        /// Objective gain of the split; with no regularisation this is half
        /// the drop in the sum of squared errors.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            TreeNode::Leaf { samples, .. } | TreeNode::Split { samples, .. } => *samples,
        }
    }

    /// Adds each split's gain to its feature.
    pub fn accumulate_gain(&self, out: &mut [f64]) {
        if let TreeNode::Split { feature, gain, left, right, .. } = self {
            out[*feature] += gain;
            left.accumulate_gain(out);
            right.accumulate_gain(out);
        }
    }

    /// Largest feature index referenced by a split, if any.
    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Midpoints between consecutive distinct values.
    Exhaustive,
    /// One uniform draw between the node's min and max, per feature.
    UniformRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub threshold_mode: ThresholdMode,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: Some(3), min_samples_split: 2, threshold_mode: ThresholdMode::Exhaustive, seed: 0 }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(invalid("max_depth must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(invalid("min_samples_split must be >= 2"));
        }
        Ok(())
    }
}

/// Checks shape and finiteness; returns the number of features.
pub(crate) fn validate_xy(features: &[Vec<f64>], targets: &[f64]) -> Result<usize> {
    if features.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if features.len() != targets.len() {
        return Err(invalid(format!("{} feature rows but {} targets", features.len(), targets.len())));
    }
    let width = features[0].len();
    if width == 0 {
        return Err(invalid("feature rows are empty"));
    }
    if let Some(row) = features.iter().position(|r| r.len() != width) {
        return Err(invalid(format!("feature row {row} has {} columns, expected {width}", features[row].len())));
    }
    if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(invalid("features and targets must be finite"));
    }
    Ok(width)
}

pub(crate) fn check_rows(rows: &[Vec<f64>], width: usize) -> Result<()> {
    match rows.iter().find(|r| r.len() != width) {
        Some(r) => Err(Error::DimensionMismatch { expected: width, got: r.len() }),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub mode: ThresholdMode,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: GrowParams,
    rng: Option<ChaCha8Rng>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let g: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let denom = h + self.params.lambda;
        TreeNode::Leaf { value: if denom > 0.0 { g / denom } else { 0.0 }, samples: idx.len() }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let pure = idx.iter().all(|&i| self.g[i] == self.g[idx[0]]);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < self.params.min_samples_split {
            return self.leaf(&idx);
        }
        let best = match self.params.mode {
            ThresholdMode::Exhaustive => self.best_exhaustive(&idx),
            ThresholdMode::UniformRandom => self.best_random(&idx),
        };
        let Some(best) = best.filter(|c| c.gain > 0.0) else {
            return self.leaf(&idx);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let samples = idx.len();
        let left = Box::new(self.grow(left, depth + 1));
        let right = Box::new(self.grow(right, depth + 1));
        TreeNode::Split { feature: best.feature, threshold: best.threshold, samples, gain: best.gain, left, right }
    }

    fn split_gain(&self, gl: f64, hl: f64, gt: f64, ht: f64) -> f64 {
        let (gr, hr) = (gt - gl, ht - hl);
        0.5 * (self.score(gl, hl) + self.score(gr, hr) - self.score(gt, ht)) - self.params.gamma
    }

    fn best_exhaustive(&self, idx: &[usize]) -> Option<Candidate> {
        let gt: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let ht: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let mut best: Option<Candidate> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x[0].len() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                gl += self.g[order[k]];
                hl += self.h[order[k]];
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if lo == hi {
                    continue;
                }
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                let gain = self.split_gain(gl, hl, gt, ht);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn best_random(&mut self, idx: &[usize]) -> Option<Candidate> {
        let gt: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let ht: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let mut best: Option<Candidate> = None;
        for f in 0..self.x[0].len() {
            let lo = idx.iter().map(|&i| self.x[i][f]).fold(f64::INFINITY, f64::min);
            let hi = idx.iter().map(|&i| self.x[i][f]).fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                continue;
            }
            let rng = self.rng.as_mut().expect("random thresholds need a generator");
            let threshold = rng.random_range(lo..hi);
            let (mut gl, mut hl) = (0.0, 0.0);
            for &i in idx {
                if self.x[i][f] <= threshold {
                    gl += self.g[i];
                    hl += self.h[i];
                }
            }
            let gain = self.split_gain(gl, hl, gt, ht);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate { feature: f, threshold, gain });
            }
        }
        best
    }
}

/// Grows one tree on `(g, h)` statistics. `rng` is required for random
/// thresholds and ignored otherwise.
pub(crate) fn grow_tree(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    params: GrowParams,
    rng: Option<ChaCha8Rng>,
) -> TreeNode {
    let mut grower = Grower { x, g, h, params, rng };
    grower.grow((0..x.len()).collect(), 0)
}

/// A fitted CART tree together with its input width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub config: TreeConfig,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_rows(rows, self.n_features)?;
        Ok(rows.iter().map(|r| self.root.predict_row(r)).collect())
    }
}

fn tree_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Greedy variance-reduction tree. Ties go to the lowest feature index, then
/// the smallest threshold.
pub fn fit_cart(features: &[Vec<f64>], targets: &[f64], config: &TreeConfig) -> Result<DecisionTree> {
    let n_features = validate_xy(features, targets)?;
    config.validate()?;
    let ones = vec![1.0; targets.len()];
    let params = GrowParams {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        lambda: 0.0,
        gamma: 0.0,
        mode: config.threshold_mode,
    };
    let rng = (config.threshold_mode == ThresholdMode::UniformRandom).then(|| tree_rng(config.seed, 0));
    let root = grow_tree(features, targets, &ones, params, rng);
    Ok(DecisionTree { n_features, config: *config, root })
}

pub fn predict_tree(model: &DecisionTree, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 10,
            tree: TreeConfig { max_depth: None, threshold_mode: ThresholdMode::UniformRandom, ..TreeConfig::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    /// Arithmetic mean of the member trees.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_rows(rows, self.n_features)?;
        let n = self.trees.len() as f64;
        Ok(rows.iter().map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / n).collect())
    }
}

/// Extremely randomized trees: every tree sees the full training set and
/// draws one threshold per feature at each node. Tree `i` uses ChaCha8
/// stream `i` of the configured seed.
pub fn fit_extra_trees(features: &[Vec<f64>], targets: &[f64], config: &ForestConfig) -> Result<ForestModel> {
    let n_features = validate_xy(features, targets)?;
    config.tree.validate()?;
    if config.n_estimators == 0 {
        return Err(invalid("n_estimators must be >= 1"));
    }
    let ones = vec![1.0; targets.len()];
    let params = GrowParams {
        max_depth: config.tree.max_depth,
        min_samples_split: config.tree.min_samples_split,
        lambda: 0.0,
        gamma: 0.0,
        mode: config.tree.threshold_mode,
    };
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|i| {
            let rng = (params.mode == ThresholdMode::UniformRandom).then(|| tree_rng(config.tree.seed, i as u64));
            grow_tree(features, targets, &ones, params, rng)
        })
        .collect();
    Ok(ForestModel { n_features, config: *config, trees })
}

pub trait FeatureImportance {
    /// Split gains per feature, normalised to sum to one; all zeros when the
    /// model has no splits.
    fn feature_importances(&self) -> Vec<f64>;
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

impl FeatureImportance for DecisionTree {
    fn feature_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        self.root.accumulate_gain(&mut acc);
        normalize(acc)
    }
}

impl FeatureImportance for ForestModel {
    fn feature_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for tree in &self.trees {
            let mut own = vec![0.0; self.n_features];
            tree.accumulate_gain(&mut own);
            for (a, v) in acc.iter_mut().zip(normalize(own)) {
                *a += v;
            }
        }
        normalize(acc)
    }
}

/// Structural sanity check used when loading models from disk.
pub(crate) fn check_tree(tree: &TreeNode, n_features: usize) -> Result<()> {
    match tree.max_feature() {
        Some(f) if f >= n_features => Err(invalid(format!("tree splits on feature {f} of {n_features}"))),
        _ => Ok(()),
    }
}
