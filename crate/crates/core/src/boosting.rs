//! Additive tree ensembles for squared loss.
//!
//! Three variants share the same stage loop and early stopping:
//! first-order residual fitting, second-order regularised boosting and
//! ordered boosting on oblivious trees.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tree::{check_rows, grow_tree, normalize, validate_xy, FeatureImportance, GrowParams, ThresholdMode, TreeNode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Rounds without validation improvement before stopping; 0 disables
    /// early stopping and the validation hold-out.
    pub early_stopping_rounds: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            lambda: 1.0,
            gamma: 0.0,
            early_stopping_rounds: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(invalid("n_rounds must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("learning_rate must be in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(invalid("max_depth must be >= 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("lambda and gamma must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("validation_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostVariant {
    FirstOrder,
    SecondOrder,
    Ordered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObliviousSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Depth-`d` tree applying the same split at every node of a level. Leaf
/// index bits are taken in level order, most significant first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObliviousTree {
    pub levels: Vec<ObliviousSplit>,
    pub leaves: Vec<f64>,
}

impl ObliviousTree {
    fn leaf_index(&self, x: &[f64]) -> usize {
        self.levels.iter().fold(0, |acc, s| 2 * acc + usize::from(x[s.feature] > s.threshold))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.leaves[self.leaf_index(x)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageTree {
    Binary { root: TreeNode },
    Oblivious { tree: ObliviousTree },
}

impl StageTree {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            StageTree::Binary { root } => root.predict_row(x),
            StageTree::Oblivious { tree } => tree.predict_row(x),
        }
    }

    fn accumulate_gain(&self, out: &mut [f64]) {
        match self {
            StageTree::Binary { root } => root.accumulate_gain(out),
            StageTree::Oblivious { tree } => {
                for s in &tree.levels {
                    out[s.feature] += s.gain;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub weight: f64,
    pub tree: StageTree,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    /// Number of stages kept after early stopping.
    pub best_iteration: usize,
    pub rounds_run: usize,
    /// Validation RMSE after each round; empty without a hold-out.
    pub validation_rmse: Vec<f64>,
    pub validation_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveEnsemble {
    pub variant: BoostVariant,
    pub n_features: usize,
    pub config: BoostConfig,
    pub base_score: f64,
    pub stages: Vec<Stage>,
    pub trace: TrainingTrace,
}

impl AdditiveEnsemble {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_rows(rows, self.n_features)?;
        Ok(rows.iter().map(|r| self.predict_row(r)).collect())
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.stages.iter().fold(self.base_score, |acc, s| acc + s.weight * s.tree.predict_row(x))
    }

    /// The ensemble after its first `k` stages.
    pub fn truncated(&self, k: usize) -> AdditiveEnsemble {
        let mut out = self.clone();
        out.stages.truncate(k);
        out
    }
}

/// `base + sum_k weight_k * tree_k(x)` over explicit parts.
pub fn predict_ensemble(base_score: f64, stages: &[Stage], rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().map(|r| stages.iter().fold(base_score, |acc, s| acc + s.weight * s.tree.predict_row(r))).collect()
}

impl FeatureImportance for AdditiveEnsemble {
    fn feature_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for s in &self.stages {
            s.tree.accumulate_gain(&mut acc);
        }
        normalize(acc)
    }
}

/// Training and validation row indices; no hold-out when early stopping is
/// off or the data are too small to spare rows.
fn holdout(n: usize, cfg: &BoostConfig) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..n).collect();
    if cfg.early_stopping_rounds == 0 || cfg.validation_fraction == 0.0 {
        return (all, Vec::new());
    }
    let n_val = ((cfg.validation_fraction * n as f64).round() as usize).max(1);
    if n < n_val + 2 {
        return (all, Vec::new());
    }
    let mut shuffled = all;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    shuffled.shuffle(&mut rng);
    let val = shuffled[..n_val].to_vec();
    let mut train = shuffled[n_val..].to_vec();
    train.sort_unstable();
    (train, val)
}

/// Fits one stage on the training rows given current predictions there.
/// Returns `None` when there is nothing left to split on.
trait StageFitter {
    fn fit_stage(&mut self, x: &[Vec<f64>], y: &[f64], pred: &[f64]) -> Option<StageTree>;
}

fn boost(
    variant: BoostVariant,
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &BoostConfig,
    make_fitter: impl FnOnce(&[Vec<f64>], &[usize], f64) -> Box<dyn StageFitter>,
) -> Result<AdditiveEnsemble> {
    let n_features = validate_xy(features, targets)?;
    cfg.validate()?;
    let (train_idx, val_idx) = holdout(targets.len(), cfg);
    let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let y: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
    let xv: Vec<&Vec<f64>> = val_idx.iter().map(|&i| &features[i]).collect();
    let yv: Vec<f64> = val_idx.iter().map(|&i| targets[i]).collect();

    let base_score = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![base_score; y.len()];
    let mut val_pred = vec![base_score; yv.len()];
    let mut fitter = make_fitter(&x, &train_idx, base_score);
    let mut stages = Vec::new();
    let mut trace = TrainingTrace { validation_size: yv.len(), ..TrainingTrace::default() };
    let mut best = f64::INFINITY;

    for round in 0..cfg.n_rounds {
        let Some(tree) = fitter.fit_stage(&x, &y, &pred) else { break };
        for (p, r) in pred.iter_mut().zip(&x) {
            *p += cfg.learning_rate * tree.predict_row(r);
        }
        for (p, r) in val_pred.iter_mut().zip(&xv) {
            *p += cfg.learning_rate * tree.predict_row(r);
        }
        stages.push(Stage { weight: cfg.learning_rate, tree });
        trace.rounds_run = round + 1;
        if yv.is_empty() {
            trace.best_iteration = stages.len();
            continue;
        }
        let rmse = (val_pred.iter().zip(&yv).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yv.len() as f64).sqrt();
        trace.validation_rmse.push(rmse);
        if rmse < best {
            best = rmse;
            trace.best_iteration = stages.len();
        } else if stages.len() - trace.best_iteration >= cfg.early_stopping_rounds {
            break;
        }
    }
    stages.truncate(trace.best_iteration);
    Ok(AdditiveEnsemble { variant, n_features, config: *cfg, base_score, stages, trace })
}

struct BinaryFitter {
    params: GrowParams,
    second_order: bool,
}

impl StageFitter for BinaryFitter {
    fn fit_stage(&mut self, x: &[Vec<f64>], y: &[f64], pred: &[f64]) -> Option<StageTree> {
        // negative gradient of 0.5 (pred - y)^2 is the residual; hessian is 1
        let residual: Vec<f64> = y.iter().zip(pred).map(|(t, p)| t - p).collect();
        let ones = vec![1.0; y.len()];
        let params = if self.second_order { self.params } else { GrowParams { lambda: 0.0, gamma: 0.0, ..self.params } };
        let root = grow_tree(x, &residual, &ones, params, None);
        matches!(root, TreeNode::Split { .. }).then_some(StageTree::Binary { root })
    }
}

fn binary_params(cfg: &BoostConfig) -> GrowParams {
    GrowParams {
        max_depth: Some(cfg.max_depth),
        min_samples_split: 2,
        lambda: cfg.lambda,
        gamma: cfg.gamma,
        mode: ThresholdMode::Exhaustive,
    }
}

/// Each stage fits a CART tree to the current residuals. `lambda` and
/// `gamma` are ignored.
pub fn fit_gradient_boosting(features: &[Vec<f64>], targets: &[f64], cfg: &BoostConfig) -> Result<AdditiveEnsemble> {
    let params = binary_params(cfg);
    boost(BoostVariant::FirstOrder, features, targets, cfg, |_, _, _| Box::new(BinaryFitter { params, second_order: false }))
}

/// Newton boosting: leaf weights `-G / (H + lambda)`, split gain
/// `0.5 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma`.
pub fn fit_regularized_boosting(features: &[Vec<f64>], targets: &[f64], cfg: &BoostConfig) -> Result<AdditiveEnsemble> {
    let params = binary_params(cfg);
    boost(BoostVariant::SecondOrder, features, targets, cfg, |_, _, _| Box::new(BinaryFitter { params, second_order: true }))
}

struct OrderedFitter {
    depth: usize,
    lambda: f64,
    step: f64,
    /// Positions into the training rows in processing order.
    order: Vec<usize>,
    borders: Vec<Vec<f64>>,
    /// Ordered-boosting predictions, built only from earlier samples.
    ordered_pred: Vec<f64>,
}

impl OrderedFitter {
    fn new(x: &[Vec<f64>], base: f64, cfg: &BoostConfig, order: Vec<usize>) -> Self {
        let borders = (0..x[0].len())
            .map(|f| {
                let mut v: Vec<f64> = x.iter().map(|r| r[f]).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.windows(2)
                    .map(|w| {
                        let mid = 0.5 * (w[0] + w[1]);
                        if mid < w[1] { mid } else { w[0] }
                    })
                    .collect()
            })
            .collect();
        OrderedFitter {
            depth: cfg.max_depth,
            lambda: cfg.lambda,
            step: cfg.learning_rate,
            order,
            borders,
            ordered_pred: vec![base; x.len()],
        }
    }

    /// Per-sample estimate from samples earlier in the order in the same
    /// leaf; zero when there are none.
    fn ordered_estimates(&self, leaf: &[usize], r: &[f64], n_leaves: usize) -> Vec<f64> {
        let mut sum = vec![0.0; n_leaves];
        let mut count = vec![0usize; n_leaves];
        let mut out = vec![0.0; r.len()];
        for &i in &self.order {
            let l = leaf[i];
            if count[l] > 0 {
                out[i] = sum[l] / (count[l] as f64 + self.lambda);
            }
            sum[l] += r[i];
            count[l] += 1;
        }
        out
    }

    fn ordered_loss(&self, leaf: &[usize], r: &[f64], n_leaves: usize) -> f64 {
        let est = self.ordered_estimates(leaf, r, n_leaves);
        r.iter().zip(&est).map(|(a, b)| (a - b).powi(2)).sum()
    }
}

impl StageFitter for OrderedFitter {
    fn fit_stage(&mut self, x: &[Vec<f64>], y: &[f64], pred: &[f64]) -> Option<StageTree> {
        let r: Vec<f64> = y.iter().zip(&self.ordered_pred).map(|(t, p)| t - p).collect();
        let mut leaf = vec![0usize; y.len()];
        let mut levels = Vec::new();
        let mut current = self.ordered_loss(&leaf, &r, 1);
        for level in 0..self.depth {
            let n_leaves = 1 << (level + 1);
            let mut best: Option<(f64, usize, f64)> = None;
            for (f, borders) in self.borders.iter().enumerate() {
                for &t in borders {
                    let cand: Vec<usize> = leaf.iter().zip(x).map(|(l, row)| 2 * l + usize::from(row[f] > t)).collect();
                    let loss = self.ordered_loss(&cand, &r, n_leaves);
                    if best.is_none_or(|b| loss < b.0) {
                        best = Some((loss, f, t));
                    }
                }
            }
            // symmetric trees always take the best border, improving or not
            let Some((loss, f, t)) = best else { break };
            levels.push(ObliviousSplit { feature: f, threshold: t, gain: (current - loss).max(0.0) });
            leaf.iter_mut().zip(x).for_each(|(l, row)| *l = 2 * *l + usize::from(row[f] > t));
            current = loss;
        }
        if levels.is_empty() {
            return None;
        }
        let n_leaves = 1 << levels.len();
        let est = self.ordered_estimates(&leaf, &r, n_leaves);
        // final leaf values: all samples, residuals of the model itself
        let mut sum = vec![0.0; n_leaves];
        let mut count = vec![0.0; n_leaves];
        for i in 0..y.len() {
            sum[leaf[i]] += y[i] - pred[i];
            count[leaf[i]] += 1.0;
        }
        let leaves = sum.iter().zip(&count).map(|(s, c)| if *c > 0.0 { s / (c + self.lambda) } else { 0.0 }).collect();
        for (p, e) in self.ordered_pred.iter_mut().zip(&est) {
            *p += self.step * e;
        }
        Some(StageTree::Oblivious { tree: ObliviousTree { levels, leaves } })
    }
}

/// Ordered boosting with a permutation drawn from `cfg.seed`.
pub fn fit_ordered_boosting(features: &[Vec<f64>], targets: &[f64], cfg: &BoostConfig) -> Result<AdditiveEnsemble> {
    let mut perm: Vec<usize> = (0..targets.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    perm.shuffle(&mut rng);
    fit_ordered_boosting_with_permutation(features, targets, cfg, &perm)
}

/// Ordered boosting on oblivious trees. Split structure is chosen by the
/// squared error of each sample's residual against the mean residual of
/// samples before it in `permutation` that share its leaf; leaf values then
/// use every training sample. `permutation` orders the input rows; rows held
/// out for validation are skipped.
pub fn fit_ordered_boosting_with_permutation(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &BoostConfig,
    permutation: &[usize],
) -> Result<AdditiveEnsemble> {
    let n = targets.len();
    let mut seen = vec![false; n];
    if permutation.len() != n || permutation.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(invalid(format!("permutation must order the {n} input rows exactly once")));
    }
    boost(BoostVariant::Ordered, features, targets, cfg, |x, train_idx, base| {
        let mut position = vec![usize::MAX; n];
        for (pos, &i) in train_idx.iter().enumerate() {
            position[i] = pos;
        }
        let order = permutation.iter().map(|&i| position[i]).filter(|&p| p != usize::MAX).collect();
        Box::new(OrderedFitter::new(x, base, cfg, order))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{fit_cart, TreeConfig};

    fn no_stop(rounds: usize, eta: f64, depth: usize) -> BoostConfig {
        BoostConfig {
            n_rounds: rounds,
            learning_rate: eta,
            max_depth: depth,
            early_stopping_rounds: 0,
            ..BoostConfig::default()
        }
    }

    fn wavy(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64, ((i * 7) % 5) as f64]).collect();
        let y = x.iter().map(|r| (6.0 * r[0]).sin() + 0.3 * r[1]).collect();
        (x, y)
    }

    fn mse(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn two_rounds_by_hand() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0.0, 1.0];
        let cfg = BoostConfig { lambda: 0.0, ..no_stop(2, 0.5, 1) };
        for model in [fit_gradient_boosting(&x, &y, &cfg).unwrap(), fit_regularized_boosting(&x, &y, &cfg).unwrap()] {
            assert_eq!(model.base_score, 0.5);
            assert_eq!(model.stages.len(), 2);
            assert_eq!(model.predict(&x).unwrap(), vec![0.125, 0.875]);
        }
    }

    #[test]
    fn unregularized_second_order_equals_first_order() {
        let (x, y) = wavy(40);
        let cfg = BoostConfig { lambda: 0.0, gamma: 0.0, ..no_stop(25, 0.3, 3) };
        let a = fit_gradient_boosting(&x, &y, &cfg).unwrap();
        let b = fit_regularized_boosting(&x, &y, &cfg).unwrap();
        assert_eq!(a.stages, b.stages);
    }

    #[test]
    fn huge_gamma_leaves_only_the_base_score() {
        let (x, y) = wavy(30);
        let cfg = BoostConfig { gamma: 1e12, ..no_stop(10, 0.1, 3) };
        let model = fit_regularized_boosting(&x, &y, &cfg).unwrap();
        assert!(model.stages.is_empty());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(model.predict(&x).unwrap().iter().all(|p| *p == mean));
    }

    #[test]
    fn training_error_never_increases() {
        let (x, y) = wavy(50);
        let cfg = no_stop(40, 0.2, 2);
        for model in [
            fit_gradient_boosting(&x, &y, &cfg).unwrap(),
            fit_regularized_boosting(&x, &y, &cfg).unwrap(),
            fit_ordered_boosting(&x, &y, &cfg).unwrap(),
        ] {
            let errs: Vec<f64> =
                (0..=model.stages.len()).map(|k| mse(&model.truncated(k).predict(&x).unwrap(), &y)).collect();
            for w in errs.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}: {} then {}", model.variant, w[0], w[1]);
            }
            assert!(errs.last().unwrap() < &(0.5 * errs[0]));
        }
    }

    #[test]
    fn early_stopping_keeps_the_best_iteration() {
        let (x, mut y) = wavy(60);
        for (i, v) in y.iter_mut().enumerate() {
            *v += if i % 2 == 0 { 0.4 } else { -0.4 };
        }
        let cfg = BoostConfig { n_rounds: 300, learning_rate: 0.5, early_stopping_rounds: 5, validation_fraction: 0.2, ..BoostConfig::default() };
        let model = fit_regularized_boosting(&x, &y, &cfg).unwrap();
        let t = &model.trace;
        assert_eq!(t.validation_size, 12);
        assert_eq!(model.stages.len(), t.best_iteration);
        assert!(t.rounds_run < 300);
        assert_eq!(t.validation_rmse.len(), t.rounds_run);
        let best = t.validation_rmse[t.best_iteration - 1];
        assert!(t.validation_rmse.iter().all(|v| best <= *v));
        assert!(best <= *t.validation_rmse.last().unwrap());
    }

    #[test]
    fn predict_ensemble_matches_model() {
        let (x, y) = wavy(25);
        let model = fit_gradient_boosting(&x, &y, &no_stop(8, 0.3, 2)).unwrap();
        assert_eq!(predict_ensemble(model.base_score, &model.stages, &x), model.predict(&x).unwrap());
    }

    #[test]
    fn ordered_stump_matches_cart_split() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let y = [0.0, 0.0, 1.0, 1.0];
        let model = fit_ordered_boosting(&x, &y, &no_stop(1, 1.0, 1)).unwrap();
        let cart = fit_cart(&x, &y, &TreeConfig { max_depth: Some(1), ..TreeConfig::default() }).unwrap();
        let StageTree::Oblivious { tree } = &model.stages[0].tree else { panic!("expected an oblivious tree") };
        let TreeNode::Split { feature, threshold, .. } = cart.root else { panic!("expected a split") };
        assert_eq!((tree.levels[0].feature, tree.levels[0].threshold), (feature, threshold));
    }

    #[test]
    fn ordered_constant_target_is_permutation_invariant() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = [2.5; 6];
        let cfg = no_stop(10, 0.3, 2);
        let a = fit_ordered_boosting_with_permutation(&x, &y, &cfg, &[0, 1, 2, 3, 4, 5]).unwrap();
        let b = fit_ordered_boosting_with_permutation(&x, &y, &cfg, &[5, 3, 1, 0, 2, 4]).unwrap();
        assert_eq!(a.predict(&x).unwrap(), vec![2.5; 6]);
        assert_eq!(b.predict(&x).unwrap(), vec![2.5; 6]);
    }

    #[test]
    fn ordered_depends_on_the_permutation() {
        let (x, y) = wavy(30);
        let cfg = no_stop(5, 0.3, 2);
        let fwd: Vec<usize> = (0..30).collect();
        let rev: Vec<usize> = (0..30).rev().collect();
        let a = fit_ordered_boosting_with_permutation(&x, &y, &cfg, &fwd).unwrap();
        let b = fit_ordered_boosting_with_permutation(&x, &y, &cfg, &rev).unwrap();
        assert_ne!(a.stages, b.stages);
        assert!(fit_ordered_boosting_with_permutation(&x, &y, &cfg, &[0, 0]).is_err());
    }

    #[test]
    fn config_validation() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0.0, 1.0];
        for bad in [
            BoostConfig { n_rounds: 0, ..BoostConfig::default() },
            BoostConfig { learning_rate: 0.0, ..BoostConfig::default() },
            BoostConfig { max_depth: 0, ..BoostConfig::default() },
            BoostConfig { lambda: -1.0, ..BoostConfig::default() },
            BoostConfig { validation_fraction: 1.0, ..BoostConfig::default() },
        ] {
            assert!(fit_regularized_boosting(&x, &y, &bad).is_err());
        }
    }

    #[test]
    fn constant_targets_stay_constant() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let model = fit_gradient_boosting(&x, &[3.0; 5], &no_stop(10, 0.5, 2)).unwrap();
        assert_eq!(model.base_score, 3.0);
        assert!(model.stages.is_empty());
        assert_eq!(model.predict(&x).unwrap(), vec![3.0; 5]);
    }

    #[test]
    fn one_full_step_interpolates() {
        let (x, y) = wavy(16);
        let model = fit_gradient_boosting(&x, &y, &no_stop(1, 1.0, 64)).unwrap();
        assert_eq!(model.stages.len(), 1);
        for (p, t) in model.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
    }

    #[test]
    fn stages_add_exactly() {
        let (x, y) = wavy(20);
        let model = fit_regularized_boosting(&x, &y, &no_stop(5, 0.3, 2)).unwrap();
        assert_eq!(model.truncated(0).predict(&x).unwrap(), vec![model.base_score; 20]);
        for k in 0..model.stages.len() {
            let before = model.truncated(k).predict(&x).unwrap();
            let after = model.truncated(k + 1).predict(&x).unwrap();
            for (i, row) in x.iter().enumerate() {
                let step = model.stages[k].weight * model.stages[k].tree.predict_row(row);
                assert_eq!(after[i], before[i] + step);
            }
        }
        assert!(matches!(model.predict(&[vec![1.0]]), Err(crate::Error::DimensionMismatch { .. })));
    }

    #[test]
    fn embedded_training_error_is_monotone() {
        let data = crate::dataset::embedded_dataset();
        let state = crate::dataset::fit_preprocess(data.rows()).unwrap();
        let x = crate::dataset::apply_preprocess(&state, data.rows()).unwrap();
        let y = data.targets();
        let cfg = no_stop(60, 0.1, 3);
        for model in [fit_gradient_boosting(&x, &y, &cfg).unwrap(), fit_regularized_boosting(&x, &y, &cfg).unwrap()] {
            let mut last = f64::INFINITY;
            for k in 0..=model.stages.len() {
                let e = mse(&model.truncated(k).predict(&x).unwrap(), &y);
                assert!(e <= last);
                last = e;
            }
        }
    }

    #[test]
    fn oblivious_levels_serialize_one_pair_each() {
        let (x, y) = wavy(30);
        let model = fit_ordered_boosting(&x, &y, &no_stop(3, 0.3, 3)).unwrap();
        let v = serde_json::to_value(&model).unwrap();
        for stage in v["stages"].as_array().unwrap() {
            let tree = &stage["tree"]["tree"];
            let levels = tree["levels"].as_array().unwrap();
            assert_eq!(levels.len(), 3);
            for level in levels {
                assert!(level["feature"].is_u64() && level["threshold"].is_f64());
            }
            assert_eq!(tree["leaves"].as_array().unwrap().len(), 8);
        }
        let again = fit_ordered_boosting(&x, &y, &no_stop(3, 0.3, 3)).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&model).unwrap());
    }
}

