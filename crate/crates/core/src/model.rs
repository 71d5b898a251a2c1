//! Model kinds, the split/preprocess/fit/evaluate pipeline and the
//! versioned model file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boosting::{
    fit_gradient_boosting, fit_ordered_boosting, fit_regularized_boosting, AdditiveEnsemble, BoostConfig,
};
use crate::dataset::{apply_preprocess, fit_preprocess, train_test_split, Dataset, PreprocessState, SampleRow};
use crate::evaluation::{compute_metrics, diagnostics_bundle, DiagnosticsBundle, MetricsReport};
use crate::error::{invalid, Error, Result};
use crate::tree::{
    check_tree, fit_cart, fit_extra_trees, DecisionTree, FeatureImportance, ForestConfig, ForestModel, TreeConfig,
};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cart,
    ExtraTrees,
    Gbm,
    Regularized,
    Ordered,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Cart, ModelKind::ExtraTrees, ModelKind::Gbm, ModelKind::Regularized, ModelKind::Ordered];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cart => "cart",
            ModelKind::ExtraTrees => "extra_trees",
            ModelKind::Gbm => "gbm",
            ModelKind::Regularized => "regularized",
            ModelKind::Ordered => "ordered",
        }
    }
}

impl ModelKind {
    /// Hyperparameters each kind trains with unless overridden. Boosting
    /// presets follow the published defaults of the reference libraries
    /// (scikit-learn gradient boosting, XGBoost, CatBoost); the single tree
    /// is capped at depth 3 and the forest has 10 trees.
    pub fn preset(self) -> TrainConfig {
        let base = TrainConfig::default();
        match self {
            ModelKind::Cart => TrainConfig { max_depth: Some(3), ..base },
            ModelKind::ExtraTrees => TrainConfig { n_estimators: Some(10), ..base },
            ModelKind::Gbm => TrainConfig {
                n_rounds: Some(100),
                learning_rate: Some(0.1),
                max_depth: Some(3),
                early_stopping_rounds: Some(0),
                ..base
            },
            ModelKind::Regularized => TrainConfig {
                n_rounds: Some(100),
                learning_rate: Some(0.3),
                max_depth: Some(6),
                lambda: Some(1.0),
                gamma: Some(0.0),
                early_stopping_rounds: Some(0),
                ..base
            },
            ModelKind::Ordered => TrainConfig {
                n_rounds: Some(1000),
                learning_rate: Some(0.03),
                max_depth: Some(6),
                lambda: Some(3.0),
                early_stopping_rounds: Some(20),
                validation_fraction: Some(0.1),
                ..base
            },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s.trim()).ok_or_else(|| {
            let known: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
            invalid(format!("unknown model '{s}'; expected one of {}", known.join(", ")))
        })
    }
}

/// Optional hyperparameter overrides; unset fields take each kind's default.
/// Fields that do not apply to the chosen kind are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_split: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_estimators: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stopping_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
}

impl TrainConfig {
    /// Fields set here win over `base`.
    pub fn over(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            test_fraction: self.test_fraction.or(base.test_fraction),
            max_depth: self.max_depth.or(base.max_depth),
            min_samples_split: self.min_samples_split.or(base.min_samples_split),
            n_estimators: self.n_estimators.or(base.n_estimators),
            n_rounds: self.n_rounds.or(base.n_rounds),
            learning_rate: self.learning_rate.or(base.learning_rate),
            lambda: self.lambda.or(base.lambda),
            gamma: self.gamma.or(base.gamma),
            early_stopping_rounds: self.early_stopping_rounds.or(base.early_stopping_rounds),
            validation_fraction: self.validation_fraction.or(base.validation_fraction),
        }
    }

    fn tree(&self, seed: u64) -> TreeConfig {
        let d = TreeConfig::default();
        TreeConfig {
            max_depth: self.max_depth.or(d.max_depth),
            min_samples_split: self.min_samples_split.unwrap_or(d.min_samples_split),
            seed,
            ..d
        }
    }

    fn forest(&self, seed: u64) -> ForestConfig {
        let d = ForestConfig::default();
        ForestConfig {
            n_estimators: self.n_estimators.unwrap_or(d.n_estimators),
            tree: TreeConfig {
                max_depth: self.max_depth.or(d.tree.max_depth),
                min_samples_split: self.min_samples_split.unwrap_or(d.tree.min_samples_split),
                seed,
                ..d.tree
            },
        }
    }

    fn boost(&self, seed: u64) -> BoostConfig {
        let d = BoostConfig::default();
        BoostConfig {
            n_rounds: self.n_rounds.unwrap_or(d.n_rounds),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            lambda: self.lambda.unwrap_or(d.lambda),
            gamma: self.gamma.unwrap_or(d.gamma),
            early_stopping_rounds: self.early_stopping_rounds.unwrap_or(d.early_stopping_rounds),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedModel {
    Tree(DecisionTree),
    Forest(ForestModel),
    Ensemble(AdditiveEnsemble),
}

impl FittedModel {
    /// Fits `kind` with `config` layered over the kind's preset.
    pub fn fit(kind: ModelKind, x: &[Vec<f64>], y: &[f64], config: &TrainConfig, seed: u64) -> Result<Self> {
        let config = &config.over(&kind.preset());
        Ok(match kind {
            ModelKind::Cart => FittedModel::Tree(fit_cart(x, y, &config.tree(seed))?),
            ModelKind::ExtraTrees => FittedModel::Forest(fit_extra_trees(x, y, &config.forest(seed))?),
            ModelKind::Gbm => FittedModel::Ensemble(fit_gradient_boosting(x, y, &config.boost(seed))?),
            ModelKind::Regularized => FittedModel::Ensemble(fit_regularized_boosting(x, y, &config.boost(seed))?),
            ModelKind::Ordered => FittedModel::Ensemble(fit_ordered_boosting(x, y, &config.boost(seed))?),
        })
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Tree(m) => m.predict(rows),
            FittedModel::Forest(m) => m.predict(rows),
            FittedModel::Ensemble(m) => m.predict(rows),
        }
    }

    pub fn feature_importances(&self) -> Vec<f64> {
        match self {
            FittedModel::Tree(m) => m.feature_importances(),
            FittedModel::Forest(m) => m.feature_importances(),
            FittedModel::Ensemble(m) => m.feature_importances(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            FittedModel::Tree(m) => m.n_features,
            FittedModel::Forest(m) => m.n_features,
            FittedModel::Ensemble(m) => m.n_features,
        }
    }
}

/// A design to score: the five model inputs without a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub lattice_type: String,
    pub thickness: f64,
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub conductivity: f64,
}

impl DesignPoint {
    pub fn validate(&self) -> Result<()> {
        let values = [self.thickness, self.young_modulus, self.poisson_ratio, self.conductivity];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("thickness, young_modulus, poisson_ratio and conductivity must be finite"));
        }
        if self.thickness <= 0.0 {
            return Err(invalid("thickness must be > 0"));
        }
        Ok(())
    }

    fn as_row(&self) -> SampleRow {
        SampleRow {
            lattice_type: self.lattice_type.clone(),
            thickness: self.thickness,
            alloy_young_modulus: self.young_modulus,
            poisson_ratio: self.poisson_ratio,
            conductivity: self.conductivity,
            target_young_modulus: f64::NAN,
        }
    }
}

impl From<&SampleRow> for DesignPoint {
    fn from(r: &SampleRow) -> Self {
        DesignPoint {
            lattice_type: r.lattice_type.clone(),
            thickness: r.thickness,
            young_modulus: r.alloy_young_modulus,
            poisson_ratio: r.poisson_ratio,
            conductivity: r.conductivity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
}

/// Everything needed to score new designs exactly as at training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: ModelKind,
    pub seed: u64,
    pub test_fraction: f64,
    pub config: TrainConfig,
    pub split: SplitSizes,
    pub preprocess: PreprocessState,
    pub metrics: MetricsReport,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn predict(&self, point: &DesignPoint) -> Result<f64> {
        point.validate()?;
        let x = self.preprocess.transform_row(&point.as_row())?;
        Ok(self.model.predict(&[x])?[0])
    }

    pub fn predict_rows(&self, rows: &[SampleRow]) -> Result<Vec<f64>> {
        self.model.predict(&apply_preprocess(&self.preprocess, rows)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(invalid(format!("unsupported model format version {v}"))),
            None => return Err(invalid("model file has no format_version")),
        }
        let artifact: ModelArtifact = serde_json::from_value(value)?;
        artifact.check()?;
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let n = self.model.n_features();
        if n != crate::dataset::N_FEATURES {
            return Err(invalid(format!("model expects {n} features")));
        }
        match &self.model {
            FittedModel::Tree(m) => check_tree(&m.root, n),
            FittedModel::Forest(m) => m.trees.iter().try_for_each(|t| check_tree(t, n)),
            FittedModel::Ensemble(_) => Ok(()),
        }
    }

    /// Recomputes the diagnostics payload on the training dataset.
    pub fn diagnostics(&self, dataset: &Dataset) -> Result<DiagnosticsBundle> {
        let split = train_test_split(dataset.len(), self.test_fraction, self.seed)?;
        let test = dataset.subset(&split.test);
        let actual: Vec<f64> = test.iter().map(|r| r.target_young_modulus).collect();
        let predicted = self.predict_rows(&test)?;
        let mut columns: Vec<Vec<f64>> = (0..=crate::dataset::N_FEATURES).map(|_| Vec::with_capacity(dataset.len())).collect();
        for row in dataset.rows() {
            let encoded = self.preprocess.encode(row)?;
            for (c, v) in encoded.iter().enumerate() {
                columns[c].push(*v);
            }
            columns[crate::dataset::N_FEATURES].push(row.target_young_modulus);
        }
        diagnostics_bundle(&actual, &predicted, &columns, self.model.feature_importances())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub artifact: ModelArtifact,
    pub test_actual: Vec<f64>,
    pub test_predicted: Vec<f64>,
}

/// Split, fit preprocessing on the training rows, fit the model and score it
/// on the held-out rows.
pub fn train_pipeline(dataset: &Dataset, kind: ModelKind, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    if dataset.len() < MIN_TRAINING_ROWS {
        return Err(invalid(format!(
            "training needs at least {MIN_TRAINING_ROWS} rows, dataset has {}",
            dataset.len()
        )));
    }
    let test_fraction = config.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION);
    let split = train_test_split(dataset.len(), test_fraction, seed)?;
    let train_rows = dataset.subset(&split.train);
    let test_rows = dataset.subset(&split.test);
    let preprocess = fit_preprocess(&train_rows)?;
    let x_train = apply_preprocess(&preprocess, &train_rows)?;
    let y_train: Vec<f64> = train_rows.iter().map(|r| r.target_young_modulus).collect();
    let x_test = apply_preprocess(&preprocess, &test_rows)?;
    let test_actual: Vec<f64> = test_rows.iter().map(|r| r.target_young_modulus).collect();

    let model = FittedModel::fit(kind, &x_train, &y_train, config, seed)?;
    let test_predicted = model.predict(&x_test)?;
    let metrics = compute_metrics(&test_actual, &test_predicted)?;
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION,
        kind,
        seed,
        test_fraction,
        config: config.clone(),
        split: SplitSizes { train: split.train.len(), test: split.test.len() },
        preprocess,
        metrics,
        model,
    };
    Ok(TrainOutcome { artifact, test_actual, test_predicted })
}
